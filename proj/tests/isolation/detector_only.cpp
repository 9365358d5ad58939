// Built against the detection module alone: no reconstruction, texture or
// training code is linked, so loading and running the archive proves the
// deployed detector does not depend on them.
#include <cstdlib>
#include <iostream>

#include "ssad/detection.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: detector_only <detector.ssad>\n";
    return 2;
  }
  try {
    const auto detector = ssad::load_detector(argv[1]);
    for (const auto& p : detector->encoder()->parameters()) {
      if (!p->name.starts_with("encoder.")) {
        std::cerr << "unexpected encoder parameter " << p->name << '\n';
        return 1;
      }
    }
    for (const auto& p : detector->head_parameters()) {
      if (!p->name.starts_with("detector.")) {
        std::cerr << "unexpected head parameter " << p->name << '\n';
        return 1;
      }
    }
    const ssad::ImageBuffer img(1, 64, 64, 0.5);
    const auto a = detector->detect(img, 0.0);
    const auto b = detector->detect(img, 0.0);
    if (a != b) {
      std::cerr << "detection is not deterministic\n";
      return 1;
    }
    std::cout << "loaded " << detector->kind() << " with " << detector->head_parameters().size()
              << " head tensors, " << a.size() << " detections\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
}
