#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "hcrl/checkpoint.hpp"
#include "hcrl/errors.hpp"

using namespace hcrl;

namespace {

Archive sample_archive() {
  Archive a;
  a.put("name", "hypercrl");
  a.put("task_index", 3);
  a.put("lr", 1.0 / 3.0);
  Eigen::VectorXd v(4);
  v << 1e-300, -0.0, 3.141592653589793, 1e300;
  a.put("theta", v);
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  a.put_matrix("eval", m);
  return a;
}

}  // namespace

TEST_CASE("archive round trip is bit exact") {
  const Archive a = sample_archive();
  const Archive b = Archive::deserialize(a.serialize());
  CHECK(a == b);
  CHECK(b.get_f64("lr") == 1.0 / 3.0);
  CHECK(b.get_i64("task_index") == 3);
  CHECK(b.get_str("name") == "hypercrl");
  CHECK(b.get_matrix("eval")(1, 2) == 6.0);
  CHECK(std::signbit(b.get_vec("theta")[1]));
  CHECK(b.serialize() == a.serialize());
}

TEST_CASE("checkpoint files") {
  const auto dir = std::filesystem::temp_directory_path() / "hcrl_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "a.ckpt";
  save_checkpoint(sample_archive(), path);
  CHECK(load_checkpoint(path) == sample_archive());

  std::string bytes = sample_archive().serialize();

  SUBCASE("flipped payload byte") {
    std::string bad = bytes;
    bad[bad.size() - 3] ^= 0x20;
    CHECK_THROWS_AS(Archive::deserialize(bad), IntegrityError);
  }
  SUBCASE("truncated file") {
    CHECK_THROWS_AS(Archive::deserialize(bytes.substr(0, bytes.size() / 2)), IntegrityError);
    CHECK_THROWS_AS(Archive::deserialize(""), IntegrityError);
  }
  SUBCASE("other format version") {
    const auto pos = bytes.find("HCRL");
    REQUIRE(pos != std::string::npos);
    std::string bad = bytes;
    std::uint32_t version = 0;
    std::memcpy(&version, bad.data() + pos + 8, 4);
    REQUIRE(version == kCheckpointVersion);
    version += 1;
    std::memcpy(bad.data() + pos + 8, &version, 4);
    CHECK_THROWS_AS(Archive::deserialize(bad), IntegrityError);
  }
  SUBCASE("missing file") { CHECK_THROWS(load_checkpoint(dir / "nope.ckpt")); }
  std::filesystem::remove_all(dir);
}

TEST_CASE("missing or mistyped fields") {
  const Archive a = sample_archive();
  CHECK_THROWS_AS(a.get_f64("absent"), IntegrityError);
  CHECK_THROWS_AS(a.get_f64("name"), IntegrityError);
}
