#include "graphdiff/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "graphdiff/error.hpp"

namespace graphdiff {

namespace {

using nlohmann::json;

void only_keys(const json &j, const std::set<std::string> &keys, const std::string &where) {
  if (!j.is_object()) throw SchemaError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!keys.count(it.key())) throw SchemaError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read(const json &j, const char *key, T &out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

OptKind optimizer_from_string(const std::string &s) {
  if (s == "adamw") return OptKind::kAdamW;
  if (s == "sgd") return OptKind::kSgd;
  throw SchemaError("unknown optimizer '" + s + "'");
}

}  // namespace

RunConfig run_config_from_json(const json &j) {
  try {
    only_keys(j, {"seed", "dataset", "conditions", "noise", "model", "train", "sample"}, "config");
    RunConfig c;
    read(j, "seed", c.seed);
    if (j.contains("dataset")) {
      const json &d = j.at("dataset");
      only_keys(d, {"path", "toy", "n_max"}, "dataset");
      read(d, "path", c.dataset.path);
      read(d, "n_max", c.dataset.n_max);
      if (d.contains("toy")) c.dataset.toy = d.at("toy").get<ToySpec>();
      if (c.dataset.path.empty() == !c.dataset.toy)
        throw SchemaError("dataset needs exactly one of 'path' and 'toy'");
    }
    if (j.contains("conditions")) {
      for (const json &e : j.at("conditions")) {
        ConditionChoice ch;
        if (e.is_string()) {
          ch.name = e.get<std::string>();
        } else {
          only_keys(e, {"name", "encoder", "n_interval"}, "condition");
          ch.name = e.at("name").get<std::string>();
          if (e.contains("encoder")) ch.encoder = encoder_from_string(e.at("encoder").get<std::string>());
          if (e.contains("n_interval")) ch.n_interval = e.at("n_interval").get<int>();
        }
        c.conditions.push_back(ch);
      }
    }
    if (j.contains("noise")) {
      const json &n = j.at("noise");
      only_keys(n, {"T", "s_offset", "coupling_mode", "lambda_couple"}, "noise");
      read(n, "T", c.noise.T);
      read(n, "s_offset", c.noise.s_offset);
      read(n, "lambda_couple", c.noise.lambda);
      if (n.contains("coupling_mode")) c.noise.coupling = coupling_from_string(n.at("coupling_mode"));
      if (c.noise.T < 1) throw SchemaError("noise.T must be >= 1");
      if (!(c.noise.lambda >= 0)) throw SchemaError("noise.lambda_couple must be >= 0");
    }
    if (j.contains("model")) {
      const json &m = j.at("model");
      only_keys(m, {"D", "layers", "heads", "K", "conditioning_mode"}, "model");
      read(m, "D", c.model.D);
      read(m, "layers", c.model.n_layers);
      read(m, "heads", c.model.n_heads);
      read(m, "K", c.model.K);
      if (m.contains("conditioning_mode")) c.model.mode = cond_mode_from_string(m.at("conditioning_mode"));
    }
    if (j.contains("train")) {
      const json &t = j.at("train");
      only_keys(t,
                {"epochs", "batch_size", "lr", "drop_ratio", "per_condition_drop", "weight_decay",
                 "optimizer", "val_samples", "val_s_guide", "checkpoint_dtype"},
                "train");
      read(t, "epochs", c.train.epochs);
      read(t, "batch_size", c.train.batch_size);
      read(t, "lr", c.train.lr);
      read(t, "drop_ratio", c.train.drop_ratio);
      read(t, "per_condition_drop", c.train.per_condition_drop);
      read(t, "weight_decay", c.train.weight_decay);
      read(t, "val_samples", c.train.val_samples);
      read(t, "val_s_guide", c.train.val_s_guide);
      if (t.contains("optimizer")) c.train.optimizer = optimizer_from_string(t.at("optimizer"));
      if (t.contains("checkpoint_dtype")) {
        std::string dt = t.at("checkpoint_dtype");
        if (dt != "f64" && dt != "f32") throw SchemaError("checkpoint_dtype must be f64 or f32");
        c.checkpoint_dtype = dt == "f32" ? DType::kF32 : DType::kF64;
      }
      if (c.train.epochs < 0 || c.train.batch_size < 1 || !(c.train.lr > 0) ||
          !(c.train.drop_ratio >= 0 && c.train.drop_ratio <= 1) || c.train.val_samples < 0)
        throw SchemaError("train section out of range");
    }
    if (j.contains("sample")) {
      const json &s = j.at("sample");
      only_keys(s, {"s_guide", "conversion", "count", "n_atoms"}, "sample");
      read(s, "s_guide", c.sample.s_guide);
      read(s, "count", c.sample_count);
      read(s, "n_atoms", c.sample.n_atoms);
      if (s.contains("conversion")) c.sample.conversion = conversion_from_string(s.at("conversion"));
      if (!(c.sample.s_guide >= 0) || c.sample_count < 0) throw SchemaError("sample section out of range");
    }
    c.sample.seed = c.seed;
    return c;
  } catch (const json::exception &e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
}

json to_json(const RunConfig &c) {
  json j;
  j["seed"] = c.seed;
  json d = json::object();
  if (c.dataset.toy) {
    d["toy"] = *c.dataset.toy;
  } else {
    d["path"] = c.dataset.path;
    d["n_max"] = c.dataset.n_max;
  }
  j["dataset"] = d;
  json conds = json::array();
  for (const auto &ch : c.conditions) {
    json e = {{"name", ch.name}};
    if (ch.encoder) e["encoder"] = to_string(*ch.encoder);
    if (ch.n_interval) e["n_interval"] = *ch.n_interval;
    conds.push_back(e);
  }
  j["conditions"] = conds;
  j["noise"] = {{"T", c.noise.T},
                {"s_offset", c.noise.s_offset},
                {"coupling_mode", to_string(c.noise.coupling)},
                {"lambda_couple", c.noise.lambda}};
  j["model"] = {{"D", c.model.D},
                {"layers", c.model.n_layers},
                {"heads", c.model.n_heads},
                {"K", c.model.K},
                {"conditioning_mode", to_string(c.model.mode)}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"lr", c.train.lr},
                {"drop_ratio", c.train.drop_ratio},
                {"per_condition_drop", c.train.per_condition_drop},
                {"weight_decay", c.train.weight_decay},
                {"optimizer", c.train.optimizer == OptKind::kSgd ? "sgd" : "adamw"},
                {"val_samples", c.train.val_samples},
                {"val_s_guide", c.train.val_s_guide},
                {"checkpoint_dtype", c.checkpoint_dtype == DType::kF32 ? "f32" : "f64"}};
  j["sample"] = {{"s_guide", c.sample.s_guide},
                 {"conversion", to_string(c.sample.conversion)},
                 {"count", c.sample_count},
                 {"n_atoms", c.sample.n_atoms}};
  return j;
}

std::string read_text(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

json read_json(const std::filesystem::path &path) {
  std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path &path) { return run_config_from_json(read_json(path)); }

Dataset resolve_dataset(const RunConfig &c, const std::filesystem::path &base) {
  Dataset d;
  if (c.dataset.toy) {
    d = gen_toy_dataset(*c.dataset.toy);
  } else {
    std::filesystem::path p = c.dataset.path;
    if (p.is_relative()) p = base / p;
    if (p.extension() == ".csv") {
      LoadOptions opt;
      opt.n_max = c.dataset.n_max;
      d = load_dataset(p, opt, c.seed);
    } else {
      d = load_dataset_bundle(p);
    }
  }
  if (!c.conditions.empty()) {
    std::vector<std::string> names;
    for (const auto &ch : c.conditions) names.push_back(ch.name);
    d = with_conditions(d, names);
    for (std::size_t k = 0; k < c.conditions.size(); ++k) {
      auto &spec = d.specs[k];
      if (c.conditions[k].encoder) {
        if (!spec.numeric()) throw SchemaError("encoder override on categorical condition '" + spec.name + "'");
        spec.encoder = *c.conditions[k].encoder;
      }
      if (c.conditions[k].n_interval) spec.n_interval = *c.conditions[k].n_interval;
      spec.validate();
    }
  }
  return d;
}

}  // namespace graphdiff
