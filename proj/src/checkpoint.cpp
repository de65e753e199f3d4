#include "dvit/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace dvit {

namespace {

constexpr char kMagic[8] = {'D', 'V', 'I', 'T', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

struct Entry {
  std::string name;
  Shape shape;
  uint64_t offset = 0;  // into the data section, in bytes
  const std::vector<double>* src = nullptr;
  std::vector<double>* dst = nullptr;
};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CheckpointError("checkpoint: truncated while reading " + what);
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<uint32_t>(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const std::string& what) {
  uint32_t n = get<uint32_t>(in, what);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw CheckpointError("checkpoint: truncated while reading " + what);
  return s;
}

}  // namespace

void checkpoint_save(TrainState& state, const std::string& path) {
  std::vector<Entry> entries;
  uint64_t offset = 0;
  auto add = [&](const std::string& name, const Shape& shape,
                 const std::vector<double>& data) {
    Entry e;
    e.name = name;
    e.shape = shape;
    e.offset = offset;
    e.src = &data;
    offset += data.size() * sizeof(double);
    entries.push_back(std::move(e));
  };
  state.model.visit([&](const std::string& name, Tensor& t) {
    add("param." + name, t.shape(), t.data());
  });
  for (auto& [name, mom] : state.adam.moments()) {
    add("adam.m." + name, {static_cast<int64_t>(mom.m.size())}, mom.m);
    add("adam.v." + name, {static_cast<int64_t>(mom.v.size())}, mom.v);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot write " + path);
  out.write(kMagic, sizeof kMagic);
  put<uint32_t>(out, kVersion);
  std::string cfg_text = state.model.cfg.canonical_text();
  put<uint64_t>(out, fnv1a(cfg_text));
  put_string(out, cfg_text);
  put<uint64_t>(out, static_cast<uint64_t>(state.step));
  put<uint64_t>(out, static_cast<uint64_t>(state.epoch));
  put<uint64_t>(out, static_cast<uint64_t>(state.adam.step_count()));
  put<uint32_t>(out, static_cast<uint32_t>(entries.size()));
  for (const auto& e : entries) {
    put_string(out, e.name);
    put<uint8_t>(out, 0);  // dtype: f64
    put<uint32_t>(out, static_cast<uint32_t>(e.shape.size()));
    for (int64_t d : e.shape) put<uint64_t>(out, static_cast<uint64_t>(d));
    put<uint64_t>(out, e.offset);
    put<uint64_t>(out, e.src->size() * sizeof(double));
  }
  for (const auto& e : entries)
    out.write(reinterpret_cast<const char*>(e.src->data()),
              static_cast<std::streamsize>(e.src->size() * sizeof(double)));
  if (!out) throw CheckpointError("checkpoint: write failed for " + path);
}

TrainState checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw CheckpointError("checkpoint: bad magic in " + path);
  uint32_t version = get<uint32_t>(in, "version");
  if (version != kVersion)
    throw CheckpointError(
        "checkpoint: format version " + std::to_string(version) +
        " unsupported (expected " + std::to_string(kVersion) +
        "); re-save with the current build or migrate the file");
  uint64_t cfg_hash = get<uint64_t>(in, "config hash");
  std::string cfg_text = get_string(in, "config text");
  if (fnv1a(cfg_text) != cfg_hash)
    throw CheckpointError("checkpoint: config hash mismatch in " + path);

  TrainState state = TrainState::fresh(CascadeConfig::from_text(cfg_text));
  state.step = static_cast<int64_t>(get<uint64_t>(in, "step"));
  state.epoch = static_cast<int64_t>(get<uint64_t>(in, "epoch"));
  state.adam.set_step_count(
      static_cast<int64_t>(get<uint64_t>(in, "adam step")));

  uint32_t count = get<uint32_t>(in, "tensor count");
  struct Rec {
    std::string name;
    Shape shape;
    uint64_t offset, bytes;
  };
  std::vector<Rec> recs;
  for (uint32_t i = 0; i < count; ++i) {
    Rec r;
    r.name = get_string(in, "tensor name");
    uint8_t dtype = get<uint8_t>(in, "dtype");
    if (dtype != 0)
      throw CheckpointError("checkpoint: unknown dtype for " + r.name);
    uint32_t ndim = get<uint32_t>(in, "ndim");
    for (uint32_t d = 0; d < ndim; ++d)
      r.shape.push_back(static_cast<int64_t>(get<uint64_t>(in, "dim")));
    r.offset = get<uint64_t>(in, "offset");
    r.bytes = get<uint64_t>(in, "byte length");
    if (r.bytes != static_cast<uint64_t>(shape_numel(r.shape)) * sizeof(double))
      throw CheckpointError("checkpoint: shape/byte mismatch for " + r.name);
    recs.push_back(std::move(r));
  }
  // Offsets must tile the data section without overlap.
  uint64_t expect = 0;
  for (const auto& r : recs) {
    if (r.offset != expect)
      throw CheckpointError("checkpoint: overlapping or out-of-order data for " +
                            r.name);
    expect += r.bytes;
  }
  std::streampos data_start = in.tellg();
  in.seekg(0, std::ios::end);
  uint64_t avail = static_cast<uint64_t>(in.tellg() - data_start);
  if (avail != expect)
    throw CheckpointError("checkpoint: data section is " +
                          std::to_string(avail) + " bytes, expected " +
                          std::to_string(expect) + " (truncated file?)");
  in.seekg(data_start);

  std::map<std::string, std::vector<double>*> targets;
  state.model.visit([&](const std::string& name, Tensor& t) {
    targets["param." + name] = &t.data();
  });
  for (const auto& r : recs) {
    std::vector<double>* dst = nullptr;
    if (auto it = targets.find(r.name); it != targets.end()) {
      dst = it->second;
      if (dst->size() * sizeof(double) != r.bytes)
        throw CheckpointError("checkpoint: size mismatch for " + r.name);
    } else if (r.name.rfind("adam.m.", 0) == 0) {
      auto& mom = state.adam.moments()[r.name.substr(7)];
      mom.m.resize(r.bytes / sizeof(double));
      dst = &mom.m;
    } else if (r.name.rfind("adam.v.", 0) == 0) {
      auto& mom = state.adam.moments()[r.name.substr(7)];
      mom.v.resize(r.bytes / sizeof(double));
      dst = &mom.v;
    } else {
      throw CheckpointError("checkpoint: unexpected tensor " + r.name);
    }
    in.read(reinterpret_cast<char*>(dst->data()),
            static_cast<std::streamsize>(r.bytes));
    if (!in) throw CheckpointError("checkpoint: truncated payload for " + r.name);
  }
  return state;
}

}  // namespace dvit
