#include "ssad/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace ssad {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  T v{};
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + raw + "' as a number");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) throw ConfigError("config key '" + key + "' must be finite");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + raw + "'");
}

std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
std::vector<T> parse_number_list(const std::string& key, const std::string& raw) {
  std::vector<T> out;
  for (const auto& s : split_list(raw)) out.push_back(parse_number<T>(key, s));
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_same_v<T, std::string>) out += v[i];
    else out += std::to_string(v[i]);
  }
  return out;
}

struct Entry {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define SSAD_INT(sec, name, field)                                                                      \
  Entry{sec, name, [](const RunConfig& c) { return std::to_string(c.field); },                         \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_number<int>(k, v); }}
#define SSAD_U64(sec, name, field)                                                                      \
  Entry{sec, name, [](const RunConfig& c) { return std::to_string(c.field); },                         \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_number<std::uint64_t>(k, v); }}
#define SSAD_REAL(sec, name, field)                                                                     \
  Entry{sec, name, [](const RunConfig& c) { return fmt(c.field); },                                    \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_number<double>(k, v); }}
#define SSAD_BOOL(sec, name, field)                                                                     \
  Entry{sec, name, [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); },         \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_bool(k, v); }}
#define SSAD_STR(sec, name, field)                                                                      \
  Entry{sec, name, [](const RunConfig& c) { return c.field; },                                         \
        [](RunConfig& c, const std::string&, const std::string& v) { c.field = trim(v); }}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table{
      SSAD_INT("synth", "n_train", synth.n_train),
      SSAD_INT("synth", "n_test", synth.n_test),
      SSAD_INT("synth", "image_size", synth.image_size),
      SSAD_INT("synth", "n_categories", synth.n_categories),

      SSAD_STR("data", "train_annotations", data.train_annotations),
      SSAD_STR("data", "test_annotations", data.test_annotations),
      SSAD_STR("data", "image_root", data.image_root),
      Entry{"data", "task", [](const RunConfig& c) { return std::string(to_string(c.data.task)); },
            [](RunConfig& c, const std::string& k, const std::string& v) {
              try {
                c.data.task = parse_task(trim(v));
              } catch (const Error& e) {
                throw ConfigError("config key '" + k + "': " + e.what());
              }
            }},

      SSAD_INT("train", "epochs", train.epochs),
      SSAD_INT("train", "batch_size", train.batch_size),
      SSAD_U64("train", "seed", train.seed),
      Entry{"train", "paradigm", [](const RunConfig& c) { return std::string(to_string(c.train.paradigm)); },
            [](RunConfig& c, const std::string& k, const std::string& v) {
              try {
                c.train.paradigm = parse_paradigm(trim(v));
              } catch (const Error& e) {
                throw ConfigError("config key '" + k + "': " + e.what());
              }
            }},
      SSAD_INT("train", "ssl_epochs", train.ssl_epochs),
      SSAD_BOOL("train", "alternating_updates", train.alternating_updates),
      SSAD_BOOL("train", "horizontal_flip", train.horizontal_flip),
      SSAD_INT("train", "image_size", train.image_size),
      SSAD_REAL("train", "mask_rate", train.mask_rate),
      SSAD_INT("train", "mask_patch", train.mask_patch),
      Entry{"train", "mask_fill",
            [](const RunConfig& c) {
              return std::string(c.train.mask_fill == MaskFill::zero ? "zero" : "learned_token_value");
            },
            [](RunConfig& c, const std::string& k, const std::string& v) {
              const auto s = trim(v);
              if (s == "zero") c.train.mask_fill = MaskFill::zero;
              else if (s == "learned_token_value") c.train.mask_fill = MaskFill::learned_token_value;
              else throw ConfigError("config key '" + k + "': expected zero or learned_token_value");
            }},

      SSAD_REAL("loss", "recon", train.weights.recon),
      SSAD_REAL("loss", "tc", train.weights.tc),
      SSAD_REAL("loss", "cls", train.weights.cls),
      SSAD_REAL("loss", "reg", train.weights.reg),
      SSAD_STR("loss", "extractor", train.extractor),
      SSAD_BOOL("loss", "tc_gather_on_normalized", train.tc_gather_on_normalized),

      SSAD_REAL("optim", "lr_det", train.lr_det),
      SSAD_REAL("optim", "lr_recon", train.lr_recon),
      Entry{"optim", "lr_drop_epochs", [](const RunConfig& c) { return join(c.train.lr_drop_epochs); },
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.train.lr_drop_epochs = parse_number_list<int>(k, v);
            }},
      SSAD_REAL("optim", "lr_drop_factor", train.lr_drop_factor),
      SSAD_REAL("optim", "weight_decay", train.weight_decay),
      SSAD_REAL("optim", "momentum", train.momentum),

      Entry{"model", "encoder_widths", [](const RunConfig& c) { return join(c.train.encoder_widths); },
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.train.encoder_widths = parse_number_list<int>(k, v);
            }},
      SSAD_INT("model", "encoder_out", train.encoder_out),
      SSAD_INT("model", "decoder_hidden1", train.decoder_hidden1),
      SSAD_INT("model", "decoder_hidden2", train.decoder_hidden2),
      SSAD_INT("model", "detector_hidden", train.detector_hidden),

      SSAD_REAL("eval", "score_threshold", eval.score_threshold),
      SSAD_REAL("eval", "nms_iou", eval.nms_iou),
      SSAD_REAL("eval", "confusion_threshold", eval.confusion_threshold),

      Entry{"compare", "seeds", [](const RunConfig& c) { return join(c.compare.seeds); },
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.compare.seeds = parse_number_list<int>(k, v);
            }},
      Entry{"compare", "paradigms", [](const RunConfig& c) { return join(c.compare.paradigms); },
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.compare.paradigms = split_list(v);
              for (const auto& p : c.compare.paradigms) {
                try {
                  parse_paradigm(p);
                } catch (const Error& e) {
                  throw ConfigError("config key '" + k + "': " + e.what());
                }
              }
            }},
      SSAD_BOOL("compare", "tc_ablation", compare.tc_ablation),
      Entry{"compare", "extractors", [](const RunConfig& c) { return join(c.compare.extractors); },
            [](RunConfig& c, const std::string&, const std::string& v) { c.compare.extractors = split_list(v); }},
  };
  return table;
}

#undef SSAD_INT
#undef SSAD_U64
#undef SSAD_REAL
#undef SSAD_BOOL
#undef SSAD_STR

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::string_view to_string(Paradigm p) {
  switch (p) {
    case Paradigm::ssad: return "ssad";
    case Paradigm::detection_only: return "detection_only";
    case Paradigm::ssl_then_ft: return "ssl_then_ft";
  }
  return "ssad";
}

Paradigm parse_paradigm(std::string_view s) {
  if (s == "ssad") return Paradigm::ssad;
  if (s == "detection_only") return Paradigm::detection_only;
  if (s == "ssl_then_ft") return Paradigm::ssl_then_ft;
  throw Error("unknown paradigm '" + std::string(s) + "' (expected ssad, detection_only or ssl_then_ft)");
}

void TrainConfig::validate() const {
  require(epochs > 0, "train.epochs must be > 0");
  require(batch_size > 0, "train.batch_size must be > 0");
  require(ssl_epochs >= 0, "train.ssl_epochs must be >= 0");
  require(mask_rate > 0.0 && mask_rate < 1.0, "train.mask_rate must lie in (0, 1)");
  require(image_size > 0, "train.image_size must be > 0");
  require(mask_patch > 0 && image_size % mask_patch == 0, "train.mask_patch must divide train.image_size");
  require(lr_det > 0.0, "optim.lr_det must be > 0");
  require(lr_recon > 0.0, "optim.lr_recon must be > 0");
  require(lr_drop_factor > 0.0, "optim.lr_drop_factor must be > 0");
  require(weight_decay >= 0.0, "optim.weight_decay must be >= 0");
  require(momentum >= 0.0 && momentum < 1.0, "optim.momentum must lie in [0, 1)");
  require(std::is_sorted(lr_drop_epochs.begin(), lr_drop_epochs.end()), "optim.lr_drop_epochs must be sorted");
  for (int d : lr_drop_epochs) {
    require(d >= 1 && d <= epochs, "optim.lr_drop_epochs entries must lie in [1, train.epochs]");
  }
  for (double w : {weights.recon, weights.tc, weights.cls, weights.reg}) {
    require(w >= 0.0, "loss weights must be >= 0");
  }
  require(weights.reconstruction_active() || weights.detection_active(), "at least one loss weight must be nonzero");
  require(encoder_widths.size() == 4, "model.encoder_widths needs four entries");
  for (int w : encoder_widths) require(w > 0, "model.encoder_widths entries must be > 0");
  require(encoder_out > 0 && decoder_hidden1 > 0 && decoder_hidden2 > 0 && detector_hidden > 0,
          "model widths must be > 0");
  require(image_size % 32 == 0, "train.image_size must be a multiple of the encoder stride (32)");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"mask_rate", mask_rate},
          {"image_size", image_size},
          {"mask_patch", mask_patch},
          {"mask_fill", mask_fill == MaskFill::zero ? "zero" : "learned_token_value"},
          {"weights", {{"recon", weights.recon}, {"tc", weights.tc}, {"cls", weights.cls}, {"reg", weights.reg}}},
          {"lr_det", lr_det},
          {"lr_recon", lr_recon},
          {"lr_drop_epochs", lr_drop_epochs},
          {"lr_drop_factor", lr_drop_factor},
          {"weight_decay", weight_decay},
          {"momentum", momentum},
          {"seed", seed},
          {"paradigm", to_string(paradigm)},
          {"ssl_epochs", ssl_epochs},
          {"alternating_updates", alternating_updates},
          {"horizontal_flip", horizontal_flip},
          {"extractor", extractor},
          {"tc_gather_on_normalized", tc_gather_on_normalized},
          {"encoder_widths", encoder_widths},
          {"encoder_out", encoder_out},
          {"decoder_hidden1", decoder_hidden1},
          {"decoder_hidden2", decoder_hidden2},
          {"detector_hidden", detector_hidden}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.mask_rate = j.at("mask_rate");
  c.image_size = j.at("image_size");
  c.mask_patch = j.at("mask_patch");
  c.mask_fill = j.at("mask_fill") == "zero" ? MaskFill::zero : MaskFill::learned_token_value;
  const auto& w = j.at("weights");
  c.weights = {w.at("recon"), w.at("tc"), w.at("cls"), w.at("reg")};
  c.lr_det = j.at("lr_det");
  c.lr_recon = j.at("lr_recon");
  c.lr_drop_epochs = j.at("lr_drop_epochs").get<std::vector<int>>();
  c.lr_drop_factor = j.at("lr_drop_factor");
  c.weight_decay = j.at("weight_decay");
  c.momentum = j.at("momentum");
  c.seed = j.at("seed");
  c.paradigm = parse_paradigm(j.at("paradigm").get<std::string>());
  c.ssl_epochs = j.at("ssl_epochs");
  c.alternating_updates = j.at("alternating_updates");
  c.horizontal_flip = j.at("horizontal_flip");
  c.extractor = j.at("extractor");
  c.tc_gather_on_normalized = j.at("tc_gather_on_normalized");
  c.encoder_widths = j.at("encoder_widths").get<std::vector<int>>();
  c.encoder_out = j.at("encoder_out");
  c.decoder_hidden1 = j.at("decoder_hidden1");
  c.decoder_hidden2 = j.at("decoder_hidden2");
  c.detector_hidden = j.at("detector_hidden");
  return c;
}

void SynthConfig::validate() const {
  require(n_train > 0, "synth.n_train must be > 0");
  require(n_test >= 0, "synth.n_test must be >= 0");
  require(image_size >= 32 && image_size % 32 == 0, "synth.image_size must be a positive multiple of 32");
  require(n_categories >= 2 && n_categories <= 8, "synth.n_categories must lie in [2, 8]");
}

nlohmann::json SynthConfig::to_json() const {
  return {{"n_train", n_train}, {"n_test", n_test}, {"image_size", image_size}, {"n_categories", n_categories}};
}

nlohmann::json DataConfig::to_json() const {
  return {{"train_annotations", train_annotations},
          {"test_annotations", test_annotations},
          {"image_root", image_root},
          {"task", to_string(task)}};
}

void EvalConfig::validate() const {
  require(score_threshold >= 0.0 && score_threshold <= 1.0, "eval.score_threshold must lie in [0, 1]");
  require(nms_iou >= 0.0 && nms_iou <= 1.0, "eval.nms_iou must lie in [0, 1]");
  require(confusion_threshold >= 0.0 && confusion_threshold <= 1.0, "eval.confusion_threshold must lie in [0, 1]");
}

nlohmann::json EvalConfig::to_json() const {
  return {{"score_threshold", score_threshold}, {"nms_iou", nms_iou}, {"confusion_threshold", confusion_threshold}};
}

nlohmann::json CompareConfig::to_json() const {
  return {{"seeds", seeds}, {"paradigms", paradigms}, {"tc_ablation", tc_ablation}, {"extractors", extractors}};
}

nlohmann::json RunConfig::to_json() const {
  return {{"synth", synth.to_json()},
          {"data", data.to_json()},
          {"train", train.to_json()},
          {"eval", eval.to_json()},
          {"compare", compare.to_json()}};
}

void RunConfig::validate() const {
  synth.validate();
  train.validate();
  eval.validate();
  require(!compare.seeds.empty(), "compare.seeds must not be empty");
}

RunConfig parse_run_config(const std::string& ini_text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  RunConfig config;
  std::set<std::string> sections;
  for (const auto& e : entries()) sections.insert(e.section);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config key '" + section + "' must live inside a [section]");
    }
    if (!sections.count(section)) throw ConfigError("unknown config section '[" + section + "]'");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      auto it = std::find_if(entries().begin(), entries().end(),
                             [&](const Entry& e) { return e.section == section && e.key == key; });
      if (it == entries().end()) throw ConfigError("unknown config key '" + full + "'");
      it->set(config, full, value.data());
    }
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_ini(const RunConfig& config) {
  std::string out, section;
  for (const auto& e : entries()) {
    if (e.section != section) {
      if (!section.empty()) out += "\n";
      section = e.section;
      out += "[" + section + "]\n";
    }
    out += e.key + " = " + e.get(config) + "\n";
  }
  return out;
}

}  // namespace ssad
