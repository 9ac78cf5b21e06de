#pragma once

// Self-describing binary container: named, typed fields behind a magic
// header, a format version and a CRC-32 of the payload. Doubles are stored
// as raw little-endian IEEE-754 so a reload is bit-exact.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace hcrl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class Archive {
 public:
  using Value = std::variant<double, std::int64_t, std::string, Eigen::VectorXd>;

  void put(const std::string& name, double v) { fields_[name] = v; }
  void put(const std::string& name, std::int64_t v) { fields_[name] = v; }
  void put(const std::string& name, int v) { fields_[name] = static_cast<std::int64_t>(v); }
  void put(const std::string& name, std::string v) { fields_[name] = std::move(v); }
  void put(const std::string& name, const char* v) { fields_[name] = std::string(v); }
  void put(const std::string& name, Eigen::VectorXd v) { fields_[name] = std::move(v); }
  /// Column-major matrix as (rows, cols, data).
  void put_matrix(const std::string& name, const Eigen::MatrixXd& m);

  bool has(const std::string& name) const { return fields_.count(name) != 0; }
  double get_f64(const std::string& name) const;
  std::int64_t get_i64(const std::string& name) const;
  const std::string& get_str(const std::string& name) const;
  const Eigen::VectorXd& get_vec(const std::string& name) const;
  Eigen::MatrixXd get_matrix(const std::string& name) const;

  std::size_t size() const { return fields_.size(); }
  bool operator==(const Archive& other) const;

  std::string serialize() const;
  /// Throws IntegrityError on a bad magic, version, length or checksum.
  static Archive deserialize(std::string_view bytes);

 private:
  const Value& at(const std::string& name) const;
  std::map<std::string, Value> fields_;
};

void save_checkpoint(const Archive& archive, const std::filesystem::path& path);
Archive load_checkpoint(const std::filesystem::path& path);

}  // namespace hcrl
