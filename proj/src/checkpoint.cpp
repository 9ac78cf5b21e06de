#include "hcrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "hcrl/errors.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

namespace hcrl {

namespace {

constexpr char kMagic[8] = {'H', 'C', 'R', 'L', 'C', 'K', 'P', 'T'};

enum class Tag : std::uint8_t { F64 = 1, I64 = 2, Str = 3, Vec = 4 };

template <typename T>
void write_raw(std::string& out, const T& v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T read() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IntegrityError("checkpoint: truncated data");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(std::string_view payload) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
}

}  // namespace

void Archive::put_matrix(const std::string& name, const Eigen::MatrixXd& m) {
  Eigen::VectorXd flat(m.size() + 2);
  flat[0] = static_cast<double>(m.rows());
  flat[1] = static_cast<double>(m.cols());
  flat.tail(m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
  put(name, std::move(flat));
}

const Archive::Value& Archive::at(const std::string& name) const {
  auto it = fields_.find(name);
  if (it == fields_.end()) throw IntegrityError("checkpoint: missing field '" + name + "'");
  return it->second;
}

namespace {

template <typename T>
const T& typed(const Archive::Value& v, const std::string& name) {
  if (const T* p = std::get_if<T>(&v)) return *p;
  throw IntegrityError("checkpoint: field '" + name + "' has an unexpected type");
}

}  // namespace

double Archive::get_f64(const std::string& name) const { return typed<double>(at(name), name); }
std::int64_t Archive::get_i64(const std::string& name) const { return typed<std::int64_t>(at(name), name); }
const std::string& Archive::get_str(const std::string& name) const { return typed<std::string>(at(name), name); }
const Eigen::VectorXd& Archive::get_vec(const std::string& name) const {
  return typed<Eigen::VectorXd>(at(name), name);
}

Eigen::MatrixXd Archive::get_matrix(const std::string& name) const {
  const Eigen::VectorXd& flat = get_vec(name);
  if (flat.size() < 2) throw IntegrityError("checkpoint: malformed matrix '" + name + "'");
  const auto rows = static_cast<Eigen::Index>(flat[0]);
  const auto cols = static_cast<Eigen::Index>(flat[1]);
  if (rows < 0 || cols < 0 || rows * cols != flat.size() - 2) {
    throw IntegrityError("checkpoint: malformed matrix '" + name + "'");
  }
  return Eigen::Map<const Eigen::MatrixXd>(flat.data() + 2, rows, cols);
}

bool Archive::operator==(const Archive& other) const {
  if (fields_.size() != other.fields_.size()) return false;
  for (const auto& [k, v] : fields_) {
    auto it = other.fields_.find(k);
    if (it == other.fields_.end() || it->second.index() != v.index()) return false;
    if (const auto* vec = std::get_if<Eigen::VectorXd>(&v)) {
      const auto& o = std::get<Eigen::VectorXd>(it->second);
      if (vec->size() != o.size() || std::memcmp(vec->data(), o.data(), sizeof(double) * vec->size()) != 0) {
        return false;
      }
    } else if (const auto* d = std::get_if<double>(&v)) {
      if (std::memcmp(d, &std::get<double>(it->second), sizeof(double)) != 0) return false;
    } else if (v != it->second) {
      return false;
    }
  }
  return true;
}

std::string Archive::serialize() const {
  std::string payload;
  write_raw(payload, static_cast<std::uint32_t>(fields_.size()));
  for (const auto& [name, value] : fields_) {
    write_raw(payload, static_cast<std::uint32_t>(name.size()));
    payload += name;
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, double>) {
            write_raw(payload, Tag::F64);
            write_raw(payload, v);
          } else if constexpr (std::is_same_v<T, std::int64_t>) {
            write_raw(payload, Tag::I64);
            write_raw(payload, v);
          } else if constexpr (std::is_same_v<T, std::string>) {
            write_raw(payload, Tag::Str);
            write_raw(payload, static_cast<std::uint64_t>(v.size()));
            payload += v;
          } else {
            write_raw(payload, Tag::Vec);
            write_raw(payload, static_cast<std::uint64_t>(v.size()));
            payload.append(reinterpret_cast<const char*>(v.data()), sizeof(double) * v.size());
          }
        },
        value);
  }

  std::string out(kMagic, sizeof(kMagic));
  write_raw(out, kCheckpointVersion);
  write_raw(out, static_cast<std::uint64_t>(payload.size()));
  out += payload;
  write_raw(out, checksum(payload));
  return out;
}

Archive Archive::deserialize(std::string_view bytes) {
  Reader head(bytes);
  if (head.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw IntegrityError("checkpoint: not a checkpoint file (bad magic)");
  }
  const auto version = head.read<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IntegrityError("checkpoint: format version " + std::to_string(version) +
                         " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto length = head.read<std::uint64_t>();
  const std::string_view payload = head.take(length);
  const auto stored = head.read<std::uint32_t>();
  if (!head.done()) throw IntegrityError("checkpoint: trailing bytes");
  if (stored != checksum(payload)) throw IntegrityError("checkpoint: checksum mismatch");

  Reader r(payload);
  Archive a;
  const auto count = r.read<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.read<std::uint32_t>();
    std::string name(r.take(name_len));
    switch (r.read<Tag>()) {
      case Tag::F64: a.fields_[name] = r.read<double>(); break;
      case Tag::I64: a.fields_[name] = r.read<std::int64_t>(); break;
      case Tag::Str: {
        const auto n = r.read<std::uint64_t>();
        a.fields_[name] = std::string(r.take(n));
        break;
      }
      case Tag::Vec: {
        const auto n = r.read<std::uint64_t>();
        const auto raw = r.take(n * sizeof(double));
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        std::memcpy(v.data(), raw.data(), raw.size());
        a.fields_[name] = std::move(v);
        break;
      }
      default: throw IntegrityError("checkpoint: unknown field type for '" + name + "'");
    }
  }
  if (!r.done()) throw IntegrityError("checkpoint: trailing payload bytes");
  return a;
}

void save_checkpoint(const Archive& archive, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  const std::string bytes = archive.serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to checkpoint " + path.string());
}

Archive load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return Archive::deserialize(ss.str());
}

}  // namespace hcrl
