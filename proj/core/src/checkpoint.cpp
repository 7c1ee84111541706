#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "gatets/config_io.hpp"
#include "gatets/trainer.hpp"

namespace gatets {

namespace {

constexpr int kCheckpointVersion = 1;

uint64_t fnv1a(const unsigned char* bytes, size_t n) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

void append_payload(std::string* payload, const std::vector<double>& values,
                    nlohmann::ordered_json* entry) {
  const size_t bytes = values.size() * sizeof(double);
  (*entry)["offset"] = payload->size();
  const auto* raw = reinterpret_cast<const unsigned char*>(values.data());
  (*entry)["checksum"] = hex64(fnv1a(raw, bytes));
  payload->append(reinterpret_cast<const char*>(raw), bytes);
}

std::vector<double> read_payload(const std::string& payload,
                                 const nlohmann::json& entry,
                                 const std::string& name, size_t count) {
  const size_t offset = entry.at("offset").get<size_t>();
  const size_t bytes = count * sizeof(double);
  if (offset + bytes > payload.size()) {
    throw DataError("checkpoint: tensor '" + name + "' extends past payload");
  }
  const auto* raw =
      reinterpret_cast<const unsigned char*>(payload.data()) + offset;
  if (hex64(fnv1a(raw, bytes)) != entry.at("checksum").get<std::string>()) {
    throw DataError("checkpoint: tensor '" + name + "' failed its checksum");
  }
  std::vector<double> values(count);
  std::memcpy(values.data(), raw, bytes);
  return values;
}

}  // namespace

nlohmann::ordered_json to_json(const GateTSConfig& c) {
  nlohmann::ordered_json j;
  j["context"] = c.context;
  j["horizon"] = c.horizon;
  j["d_model"] = c.d_model;
  j["n_heads"] = c.n_heads;
  j["n_experts"] = c.n_experts;
  j["active_experts"] = c.active_experts;
  j["ffn_width"] = c.ffn_width;
  j["dropout"] = c.dropout;
  j["router"] = to_string(c.router);
  j["seed"] = c.seed;
  return j;
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["base_lr"] = c.base_lr;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["weight_decay"] = c.weight_decay;
  j["warmup_fraction"] = c.warmup_fraction;
  j["seed"] = c.seed;
  j["checkpoint_every"] = c.checkpoint_every;
  j["patience"] = c.patience;
  return j;
}

namespace {

void reject_unknown_keys(const nlohmann::json& j,
                         const std::vector<std::string>& valid,
                         const char* what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(valid.begin(), valid.end(), it.key()) == valid.end()) {
      std::string keys;
      for (const std::string& k : valid) {
        if (!keys.empty()) keys += ", ";
        keys += k;
      }
      throw ConfigError(std::string(what) + ": unknown key '" + it.key() +
                        "' (valid keys: " + keys + ")");
    }
  }
}

const std::vector<std::string> kModelKeys = {
    "context",  "horizon",        "d_model",   "n_heads", "n_experts",
    "active_experts", "ffn_width", "dropout",  "router",  "seed"};

const std::vector<std::string> kTrainKeys = {
    "epochs",       "batch_size",      "base_lr", "beta1",
    "beta2",        "eps",             "weight_decay", "warmup_fraction",
    "seed",         "checkpoint_every", "patience"};

}  // namespace

GateTSConfig model_config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, kModelKeys, "model config");
  GateTSConfig c;
  if (j.contains("context")) c.context = j["context"].get<int64_t>();
  if (j.contains("horizon")) c.horizon = j["horizon"].get<int64_t>();
  if (j.contains("d_model")) c.d_model = j["d_model"].get<int64_t>();
  if (j.contains("n_heads")) c.n_heads = j["n_heads"].get<int64_t>();
  if (j.contains("n_experts")) c.n_experts = j["n_experts"].get<int64_t>();
  if (j.contains("active_experts"))
    c.active_experts = j["active_experts"].get<int64_t>();
  if (j.contains("ffn_width")) c.ffn_width = j["ffn_width"].get<int64_t>();
  if (j.contains("dropout")) c.dropout = j["dropout"].get<double>();
  if (j.contains("router"))
    c.router = router_kind_from_string(j["router"].get<std::string>());
  if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
  c.validate();
  return c;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, kTrainKeys, "train config");
  TrainConfig c;
  if (j.contains("epochs")) c.epochs = j["epochs"].get<int64_t>();
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int64_t>();
  if (j.contains("base_lr")) c.base_lr = j["base_lr"].get<double>();
  if (j.contains("beta1")) c.beta1 = j["beta1"].get<double>();
  if (j.contains("beta2")) c.beta2 = j["beta2"].get<double>();
  if (j.contains("eps")) c.eps = j["eps"].get<double>();
  if (j.contains("weight_decay"))
    c.weight_decay = j["weight_decay"].get<double>();
  if (j.contains("warmup_fraction"))
    c.warmup_fraction = j["warmup_fraction"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
  if (j.contains("checkpoint_every"))
    c.checkpoint_every = j["checkpoint_every"].get<int64_t>();
  if (j.contains("patience")) c.patience = j["patience"].get<int64_t>();
  c.validate();
  return c;
}

void apply_override(GateTSConfig* model_config, TrainConfig* train_config,
                    const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  nlohmann::json patch;
  try {
    patch[key] = nlohmann::json::parse(value);
  } catch (const nlohmann::json::exception&) {
    patch[key] = value;  // bare strings, e.g. router=hmm
  }
  const bool is_model =
      std::find(kModelKeys.begin(), kModelKeys.end(), key) != kModelKeys.end();
  const bool is_train =
      std::find(kTrainKeys.begin(), kTrainKeys.end(), key) != kTrainKeys.end();
  if (!is_model && !is_train) {
    std::string keys;
    for (const std::string& k : kModelKeys) keys += k + ", ";
    for (const std::string& k : kTrainKeys) keys += k + ", ";
    throw ConfigError("unknown override key '" + key + "' (valid keys: " +
                      keys.substr(0, keys.size() - 2) + ")");
  }
  if (is_model && model_config) {
    nlohmann::json merged = nlohmann::json(to_json(*model_config));
    merged[key] = patch[key];
    *model_config = model_config_from_json(merged);
  }
  if (is_train && !is_model && train_config) {
    nlohmann::json merged = nlohmann::json(to_json(*train_config));
    merged[key] = patch[key];
    *train_config = train_config_from_json(merged);
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::ordered_json header;
  header["format_version"] = kCheckpointVersion;
  header["model_config"] = to_json(ckpt.model_config);
  header["train_config"] = to_json(ckpt.train_config);
  nlohmann::ordered_json state;
  state["step"] = ckpt.step;
  state["epoch"] = ckpt.epoch;
  state["total_steps"] = ckpt.total_steps;
  state["warmup_steps"] = ckpt.warmup_steps;
  if (std::isfinite(ckpt.best_val)) {
    state["best_val"] = ckpt.best_val;
  } else {
    state["best_val"] = nullptr;
  }
  header["state"] = state;

  std::string payload;
  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  for (const NamedParam& np : ckpt.params) {
    nlohmann::ordered_json entry;
    entry["name"] = np.name;
    entry["shape"] = np.tensor.shape();
    append_payload(&payload, np.tensor.values(), &entry);
    manifest.push_back(entry);
  }
  for (size_t i = 0; i < ckpt.adam_m.size(); ++i) {
    nlohmann::ordered_json entry;
    entry["name"] = "adamw.m." + ckpt.params[i].name;
    entry["shape"] = Shape{static_cast<int64_t>(ckpt.adam_m[i].size())};
    append_payload(&payload, ckpt.adam_m[i], &entry);
    manifest.push_back(entry);
  }
  for (size_t i = 0; i < ckpt.adam_v.size(); ++i) {
    nlohmann::ordered_json entry;
    entry["name"] = "adamw.v." + ckpt.params[i].name;
    entry["shape"] = Shape{static_cast<int64_t>(ckpt.adam_v[i].size())};
    append_payload(&payload, ckpt.adam_v[i], &entry);
    manifest.push_back(entry);
  }
  header["tensors"] = manifest;

  const std::string head = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  const uint64_t head_len = head.size();
  unsigned char len_bytes[8];
  for (int i = 0; i < 8; ++i) {
    len_bytes[i] = static_cast<unsigned char>((head_len >> (8 * i)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(len_bytes), 8);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  unsigned char len_bytes[8];
  in.read(reinterpret_cast<char*>(len_bytes), 8);
  if (!in) throw DataError("checkpoint '" + path + "' is truncated");
  uint64_t head_len = 0;
  for (int i = 7; i >= 0; --i) head_len = (head_len << 8) | len_bytes[i];
  std::string head(head_len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head_len));
  if (!in) throw DataError("checkpoint '" + path + "' is truncated");
  std::stringstream rest;
  rest << in.rdbuf();
  const std::string payload = rest.str();

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(head);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint '" + path + "' has a corrupt header: " +
                    e.what());
  }
  if (header.at("format_version").get<int>() != kCheckpointVersion) {
    throw DataError("checkpoint '" + path + "' has unsupported version " +
                    header.at("format_version").dump());
  }
  Checkpoint ckpt;
  ckpt.model_config = model_config_from_json(header.at("model_config"));
  ckpt.train_config = train_config_from_json(header.at("train_config"));
  const auto& state = header.at("state");
  ckpt.step = state.at("step").get<int64_t>();
  ckpt.epoch = state.at("epoch").get<int64_t>();
  ckpt.total_steps = state.at("total_steps").get<int64_t>();
  ckpt.warmup_steps = state.at("warmup_steps").get<int64_t>();
  if (!state.at("best_val").is_null()) {
    ckpt.best_val = state.at("best_val").get<double>();
  }

  std::map<std::string, const nlohmann::json*> moment_entries;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    if (name.rfind("adamw.", 0) == 0) {
      moment_entries[name] = &entry;
      continue;
    }
    const Shape shape = entry.at("shape").get<Shape>();
    std::vector<double> values = read_payload(
        payload, entry, name, static_cast<size_t>(numel(shape)));
    ckpt.params.push_back({name, Tensor::from_data(shape, std::move(values))});
  }
  for (const NamedParam& np : ckpt.params) {
    for (const char* prefix : {"adamw.m.", "adamw.v."}) {
      const std::string key = prefix + np.name;
      auto it = moment_entries.find(key);
      if (it == moment_entries.end()) {
        throw DataError("checkpoint: missing optimizer buffer '" + key + "'");
      }
      const Shape shape = it->second->at("shape").get<Shape>();
      std::vector<double> values = read_payload(
          payload, *it->second, key, static_cast<size_t>(numel(shape)));
      if (key[6] == 'm') {
        ckpt.adam_m.push_back(std::move(values));
      } else {
        ckpt.adam_v.push_back(std::move(values));
      }
    }
  }
  return ckpt;
}

GateTS model_from_checkpoint(const Checkpoint& ckpt) {
  GateTS model(ckpt.model_config);
  std::map<std::string, const NamedParam*> by_name;
  for (const NamedParam& np : ckpt.params) by_name[np.name] = &np;
  for (NamedParam& np : model.named_parameters()) {
    auto it = by_name.find(np.name);
    if (it == by_name.end()) {
      throw DataError("checkpoint: missing tensor '" + np.name + "'");
    }
    const Tensor& stored = it->second->tensor;
    if (stored.shape() != np.tensor.shape()) {
      throw ShapeError("checkpoint: tensor '" + np.name + "' has shape " +
                       shape_str(stored.shape()) + ", model expects " +
                       shape_str(np.tensor.shape()));
    }
    np.tensor.values() = stored.values();
  }
  return model;
}

}  // namespace gatets
