#include "selfnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace selfnet {

namespace {

void put_u8(std::string& b, std::uint8_t v) { b.push_back(static_cast<char>(v)); }

void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& b, float f) { put_u32(b, std::bit_cast<std::uint32_t>(f)); }

void put_string(std::string& b, const std::string& s) {
  if (s.size() > 0xffff) throw InputError("checkpoint id longer than 65535 bytes");
  put_u16(b, static_cast<std::uint16_t>(s.size()));
  b.append(s);
}

void put_floats(std::string& b, const float* data, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) put_f32(b, data[i]);
}

struct Cursor {
  const unsigned char* p;
  std::size_t left;

  void need(std::size_t bytes) const {
    if (bytes > left) throw FormatError("truncated checkpoint");
  }
  std::uint8_t u8() {
    need(1);
    --left;
    return *p++;
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    p += 2;
    left -= 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    p += 4;
    left -= 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    p += 8;
    left -= 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(p), len);
    p += len;
    left -= len;
    return s;
  }
};

long dims_param_count(const std::vector<std::uint32_t>& dims) {
  long n = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    n += (static_cast<long>(dims[i]) + 1) * static_cast<long>(dims[i + 1]);
  }
  return n;
}

void encode_item(std::string& b, const CheckpointItem& item) {
  if (const auto* pv = std::get_if<ParamVector>(&item)) {
    put_u8(b, 0);
    put_string(b, pv->task_id);
    if (!pv->arch_dims.empty()) {
      const long expected = dims_param_count(pv->arch_dims);
      if (expected != static_cast<long>(pv->values.size())) {
        throw IntegrityError("param vector '" + pv->task_id + "': " +
                             std::to_string(pv->values.size()) + " values but arch needs " +
                             std::to_string(expected));
      }
    }
    put_u16(b, static_cast<std::uint16_t>(pv->arch_dims.size()));
    for (std::uint32_t d : pv->arch_dims) put_u32(b, d);
    put_u64(b, static_cast<std::uint64_t>(pv->values.size()) * 4);
    put_floats(b, pv->values.data(), pv->values.size());
  } else if (const auto* lr = std::get_if<LatentRecord>(&item)) {
    lr->validate();
    put_u8(b, 1);
    put_string(b, lr->task_id);
    put_u64(b, lr->original_len);
    put_u32(b, lr->chunk_size);
    put_u32(b, static_cast<std::uint32_t>(lr->latent_dim()));
    put_u32(b, static_cast<std::uint32_t>(lr->code_count()));
    put_u16(b, static_cast<std::uint16_t>(lr->arch_dims.size()));
    for (std::uint32_t d : lr->arch_dims) put_u32(b, d);
    put_u64(b, static_cast<std::uint64_t>(lr->code_count()) * lr->latent_dim() * 4);
    for (const auto& code : lr->codes) put_floats(b, code.data(), code.size());
  } else {
    const auto& cae = std::get<CaeModel>(item);
    put_u8(b, 2);
    put_string(b, "cae");
    put_u32(b, static_cast<std::uint32_t>(cae.input_dim()));
    put_u32(b, static_cast<std::uint32_t>(cae.hidden_dim()));
    put_u32(b, static_cast<std::uint32_t>(cae.latent_dim()));
    put_f32(b, cae.contractive_coeff);
    ParamVector flat = flatten(cae.net);
    put_u64(b, static_cast<std::uint64_t>(flat.values.size()) * 4);
    put_floats(b, flat.values.data(), flat.values.size());
  }
}

std::vector<float> read_payload(Cursor& c, std::uint64_t expected_bytes) {
  const std::uint64_t len = c.u64();
  if (len != expected_bytes) {
    throw FormatError("payload length " + std::to_string(len) + ", expected " +
                      std::to_string(expected_bytes));
  }
  std::vector<float> values(static_cast<std::size_t>(len / 4));
  c.need(static_cast<std::size_t>(len));
  for (auto& v : values) v = c.f32();
  return values;
}

CheckpointItem decode_item(Cursor& c) {
  const std::uint8_t kind = c.u8();
  const std::string id = c.str(c.u16());
  switch (kind) {
    case 0: {
      ParamVector pv;
      pv.task_id = id;
      const std::uint16_t ndims = c.u16();
      for (int i = 0; i < ndims; ++i) pv.arch_dims.push_back(c.u32());
      std::uint64_t expected;
      if (pv.arch_dims.empty()) {
        // raw vector: trust the stored length, only require whole floats
        const std::uint64_t len = c.u64();
        if (len % 4 != 0) throw FormatError("payload length not a multiple of 4");
        c.need(static_cast<std::size_t>(len));
        pv.values.resize(static_cast<std::size_t>(len / 4));
        for (auto& v : pv.values) v = c.f32();
        return pv;
      }
      expected = static_cast<std::uint64_t>(dims_param_count(pv.arch_dims)) * 4;
      pv.values = read_payload(c, expected);
      return pv;
    }
    case 1: {
      LatentRecord lr;
      lr.task_id = id;
      lr.original_len = c.u64();
      lr.chunk_size = c.u32();
      const std::uint32_t d = c.u32();
      const std::uint32_t count = c.u32();
      const std::uint16_t ndims = c.u16();
      for (int i = 0; i < ndims; ++i) lr.arch_dims.push_back(c.u32());
      auto values = read_payload(c, static_cast<std::uint64_t>(count) * d * 4);
      lr.codes.reserve(count);
      for (std::uint32_t i = 0; i < count; ++i) {
        lr.codes.emplace_back(values.begin() + static_cast<std::size_t>(i) * d,
                              values.begin() + static_cast<std::size_t>(i + 1) * d);
      }
      lr.validate();
      return lr;
    }
    case 2: {
      const std::uint32_t n = c.u32();
      const std::uint32_t h = c.u32();
      const std::uint32_t d = c.u32();
      const float lambda_c = c.f32();
      if (n == 0 || h == 0 || d == 0) throw FormatError("cae item with zero dimension");
      ArchDescriptor arch = make_cae_arch(static_cast<int>(n), static_cast<int>(h),
                                          static_cast<int>(d));
      auto values = read_payload(c, static_cast<std::uint64_t>(arch.param_count()) * 4);
      ParamVector pv;
      pv.values = std::move(values);
      CaeModel model;
      model.net = unflatten(pv, arch);
      model.contractive_coeff = lambda_c;
      return model;
    }
    default:
      throw FormatError("unknown item kind " + std::to_string(kind));
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<CheckpointItem>& items) {
  std::string buf;
  buf.append("SFNT");
  put_u16(buf, kCheckpointVersion);
  put_u32(buf, static_cast<std::uint32_t>(items.size()));
  for (const auto& item : items) encode_item(buf, item);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open checkpoint for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("short write to checkpoint: " + path.string());
}

std::vector<CheckpointItem> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("checkpoint not found: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Cursor c{reinterpret_cast<const unsigned char*>(buf.data()), buf.size()};
  if (c.str(c.left < 4 ? c.left : 4) != "SFNT") {
    throw FormatError("bad checkpoint magic in " + path.string());
  }
  const std::uint16_t version = c.u16();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) +
                       " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t count = c.u32();
  std::vector<CheckpointItem> items;
  items.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) items.push_back(decode_item(c));
  if (c.left != 0) {
    throw FormatError(std::to_string(c.left) + " trailing bytes in " + path.string());
  }
  return items;
}

}  // namespace selfnet
