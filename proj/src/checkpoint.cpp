#include "graphdiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "graphdiff/error.hpp"

namespace graphdiff {

namespace {

static_assert(std::endian::native == std::endian::little, "payloads are written little-endian");

constexpr const char *kFormat = "graphdiff-checkpoint";

void append(std::string &buf, const Tensor &t, DType dtype) {
  for (double x : t.data) {
    if (dtype == DType::kF64) {
      char b[8];
      std::memcpy(b, &x, 8);
      buf.append(b, 8);
    } else {
      float f = static_cast<float>(x);
      char b[4];
      std::memcpy(b, &f, 4);
      buf.append(b, 4);
    }
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path &manifest, const ParamStore &params,
                     const nlohmann::json &meta, DType dtype) {
  const std::string dt = dtype == DType::kF64 ? "f64" : "f32";
  std::filesystem::path payload = manifest;
  payload.replace_extension(".bin");
  std::string buf;
  nlohmann::json tensors = nlohmann::json::array();
  auto put = [&](const std::string &name, const Tensor &t) {
    tensors.push_back({{"name", name}, {"shape", t.shape}, {"dtype", dt}, {"offset", buf.size()}});
    append(buf, t, dtype);
  };
  for (const auto &name : params.names()) put(name, params.get(name));
  for (const auto &name : params.names()) put("adam.m/" + name, params.state(name).m);
  for (const auto &name : params.names()) put("adam.v/" + name, params.state(name).v);

  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = 1;
  j["dtype"] = dt;
  j["payload"] = payload.filename().string();
  j["payload_bytes"] = buf.size();
  j["step"] = params.step;
  j["tensors"] = std::move(tensors);
  j["meta"] = meta;

  std::ofstream pb(payload, std::ios::binary);
  if (!pb) throw IoError("cannot write " + payload.string());
  pb.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!pb) throw IoError("write failed for " + payload.string());
  std::ofstream mf(manifest, std::ios::binary);
  if (!mf) throw IoError("cannot write " + manifest.string());
  mf << j.dump(1) << "\n";
  if (!mf) throw IoError("write failed for " + manifest.string());
}

Checkpoint load_checkpoint(const std::filesystem::path &manifest) {
  std::ifstream mf(manifest, std::ios::binary);
  if (!mf) throw IoError("cannot open " + manifest.string());
  nlohmann::json j;
  try {
    mf >> j;
  } catch (const nlohmann::json::exception &e) {
    throw CompatibilityError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  Checkpoint ck;
  try {
    if (j.at("format") != kFormat || j.at("version") != 1)
      throw CompatibilityError("not a version-1 checkpoint manifest");
    const std::string dt = j.at("dtype");
    if (dt != "f64" && dt != "f32") throw CompatibilityError("unknown dtype " + dt);
    const std::size_t width = dt == "f64" ? 8 : 4;
    std::filesystem::path payload = manifest.parent_path() / j.at("payload").get<std::string>();
    std::ifstream pb(payload, std::ios::binary);
    if (!pb) throw IoError("cannot open " + payload.string());
    std::string buf((std::istreambuf_iterator<char>(pb)), std::istreambuf_iterator<char>());
    if (buf.size() != j.at("payload_bytes").get<std::size_t>())
      throw CompatibilityError("payload size does not match the manifest");

    std::vector<std::pair<std::string, Tensor>> moments;
    for (const auto &e : j.at("tensors")) {
      Tensor t(e.at("shape").get<std::vector<int>>());
      std::size_t off = e.at("offset");
      if (e.at("dtype") != dt) throw CompatibilityError("mixed dtypes in one checkpoint");
      if (off + t.size() * width > buf.size()) throw CompatibilityError("tensor runs past the payload");
      for (std::size_t k = 0; k < t.size(); ++k) {
        if (width == 8) {
          std::memcpy(&t.data[k], buf.data() + off + 8 * k, 8);
        } else {
          float f;
          std::memcpy(&f, buf.data() + off + 4 * k, 4);
          t.data[k] = f;
        }
      }
      std::string name = e.at("name");
      if (name.rfind("adam.", 0) == 0) {
        moments.emplace_back(std::move(name), std::move(t));
      } else {
        ck.params.add(name, std::move(t));
      }
    }
    for (auto &[name, t] : moments) {
      std::string base = name.substr(7);
      if (!ck.params.contains(base)) throw CompatibilityError("moment for unknown tensor " + base);
      ParamState &s = ck.params.state(base);
      if (t.shape != s.value.shape) throw CompatibilityError("moment shape mismatch for " + base);
      (name[5] == 'm' ? s.m : s.v) = std::move(t);
    }
    ck.params.step = j.at("step").get<std::int64_t>();
    ck.meta = j.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception &e) {
    throw CompatibilityError(std::string("malformed checkpoint manifest: ") + e.what());
  } catch (const ShapeError &e) {
    throw CompatibilityError(std::string("inconsistent checkpoint: ") + e.what());
  }
  return ck;
}

}  // namespace graphdiff
