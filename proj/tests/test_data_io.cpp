#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <set>
#include <fstream>
#include <vector>

#include "tgseg/data/btsr.hpp"
#include "tgseg/data/dataset.hpp"
#include "tgseg/data/synthetic.hpp"
#include "tgseg/util/rng.hpp"

using namespace tgseg;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("tgseg-test-" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool bit_equal(const ad::TensorF& a, const ad::TensorF& b) {
  return a.shape == b.shape &&
         std::memcmp(a.data.data(), b.data.data(), a.numel() * 4) == 0;
}

}  // namespace

TEST_CASE("tensor file round-trip is bit-exact") {
  const fs::path dir = fresh_dir("btsr");
  ad::TensorF t({2, 3});
  SUBCASE("zeros") {}
  SUBCASE("random") {
    Rng rng(1);
    for (auto& v : t.data) v = rng.uniform_f(-10, 10);
  }
  data::write_tensor_file(t, dir / "t.btsr");
  const ad::TensorF back = data::read_tensor_file(dir / "t.btsr");
  CHECK(bit_equal(t, back));
}

TEST_CASE("bad magic is a distinct error") {
  const fs::path dir = fresh_dir("badmagic");
  std::ofstream(dir / "x.btsr", std::ios::binary) << "XXXXjunkjunkjunk";
  try {
    data::read_tensor_file(dir / "x.btsr");
    FAIL("expected IoError");
  } catch (const data::IoError& e) {
    CHECK(e.kind() == data::IoErrorKind::bad_magic);
  }
}

TEST_CASE("declared extents [2,3] with 5 payload reals is a truncation error") {
  const fs::path dir = fresh_dir("trunc");
  // Byte-level fixture: magic, version, rank 2, extents 2 and 3, 5 floats.
  std::string buf = "BTSR";
  buf.push_back(1);
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  u32(2);
  u32(2);
  u32(3);
  for (int i = 0; i < 5; ++i) u32(0x3f800000);  // 1.0f
  std::ofstream(dir / "t.btsr", std::ios::binary) << buf;
  try {
    data::read_tensor_file(dir / "t.btsr");
    FAIL("expected IoError");
  } catch (const data::IoError& e) {
    CHECK(e.kind() == data::IoErrorKind::truncated);
  }

  // One extra real on top of the declared six is trailing data.
  for (int i = 0; i < 2; ++i) u32(0x3f800000);
  std::ofstream(dir / "t2.btsr", std::ios::binary) << buf;
  try {
    data::read_tensor_file(dir / "t2.btsr");
    FAIL("expected IoError");
  } catch (const data::IoError& e) {
    CHECK(e.kind() == data::IoErrorKind::trailing_data);
  }
}

TEST_CASE("extent overflow and zero extents are rejected") {
  const fs::path dir = fresh_dir("extent");
  std::string buf = "BTSR";
  buf.push_back(1);
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  SUBCASE("overflowing product") {
    u32(3);
    u32(70000);
    u32(70000);
    u32(70000);
  }
  SUBCASE("zero extent") {
    u32(2);
    u32(0);
    u32(3);
  }
  std::ofstream(dir / "t.btsr", std::ios::binary) << buf;
  try {
    data::read_tensor_file(dir / "t.btsr");
    FAIL("expected IoError");
  } catch (const data::IoError& e) {
    CHECK(e.kind() == data::IoErrorKind::extent_overflow);
  }
}

TEST_CASE("dataset save/load round trip and loader error paths") {
  const fs::path dir = fresh_dir("ds");
  data::Dataset d = data::generate_synthetic(3, 16, 8, 42);
  data::save_dataset(d, dir);

  const data::Dataset back = data::load_dataset(dir);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.samples[i].id == d.samples[i].id);
    CHECK(bit_equal(back.samples[i].image, d.samples[i].image));
    CHECK(bit_equal(back.samples[i].mask, d.samples[i].mask));
    CHECK(bit_equal(back.samples[i].text, d.samples[i].text));
  }

  SUBCASE("missing mask file names the id") {
    fs::remove(dir / "s0001.mask.btsr");
    try {
      data::load_dataset(dir);
      FAIL("expected DataError");
    } catch (const data::DataError& e) {
      CHECK(e.kind() == data::DataErrorKind::missing_file);
      CHECK(std::string(e.what()).find("s0001") != std::string::npos);
    }
  }
  SUBCASE("non-binary mask value is rejected, not coerced") {
    ad::TensorF bad = d.samples[1].mask;
    bad.data[5] = 0.5f;
    data::write_tensor_file(bad, dir / "s0001.mask.btsr");
    try {
      data::load_dataset(dir);
      FAIL("expected DataError");
    } catch (const data::DataError& e) {
      CHECK(e.kind() == data::DataErrorKind::non_binary_mask);
    }
  }
  SUBCASE("inconsistent text dims across samples are rejected") {
    data::write_tensor_file(ad::TensorF({9}), dir / "s0002.txt.btsr");
    try {
      data::load_dataset(dir);
      FAIL("expected DataError");
    } catch (const data::DataError& e) {
      CHECK(e.kind() == data::DataErrorKind::inconsistent_text_dim);
    }
  }
  SUBCASE("duplicate manifest ids are rejected") {
    std::ofstream(dir / "manifest.tsv", std::ios::app) << "s0000\ttrain\n";
    try {
      data::load_dataset(dir);
      FAIL("expected DataError");
    } catch (const data::DataError& e) {
      CHECK(e.kind() == data::DataErrorKind::duplicate_id);
    }
  }
}

TEST_CASE("writing to an unwritable path raises open_failed") {
  try {
    data::write_tensor_file(ad::TensorF({2}), "/nonexistent-dir/t.btsr");
    FAIL("expected IoError");
  } catch (const data::IoError& e) {
    CHECK(e.kind() == data::IoErrorKind::open_failed);
  }
}

TEST_CASE("synthetic generation is bit-identical under one seed") {
  const data::Dataset a = data::generate_synthetic(4, 64, 16, 7);
  const data::Dataset b = data::generate_synthetic(4, 64, 16, 7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(bit_equal(a.samples[i].image, b.samples[i].image));
    CHECK(bit_equal(a.samples[i].mask, b.samples[i].mask));
    CHECK(bit_equal(a.samples[i].text, b.samples[i].text));
  }
  const data::Dataset c = data::generate_synthetic(4, 64, 16, 8);
  CHECK_FALSE(bit_equal(a.samples[0].image, c.samples[0].image));
}

TEST_CASE("every generated mask is nonempty with foreground fraction in bounds") {
  // Counting oracle over many seeds; images stay off to keep this fast.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const data::Dataset d = data::generate_synthetic(100, 32, 4, seed);
    for (const auto& s : d.samples) {
      std::size_t fg = 0;
      for (float v : s.mask.data) {
        CHECK((v == 0.0f || v == 1.0f));
        fg += v == 1.0f;
      }
      const double frac = static_cast<double>(fg) / static_cast<double>(s.mask.numel());
      CHECK(frac >= 0.02);
      CHECK(frac <= 0.40);
      CHECK(fg > 0);
    }
  }
}

TEST_CASE("image values stay in [0,1]") {
  const data::Dataset d = data::generate_synthetic(8, 64, 8, 3);
  for (const auto& s : d.samples)
    for (float v : s.image.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
}

TEST_CASE("text embeddings linearly decode the area quantile") {
  // 500 samples, ridge regression on one-hot area bins, held-out accuracy.
  const std::size_t dt = 32;
  const data::Dataset d = data::generate_synthetic(500, 32, dt, 12345);
  const std::size_t n_train = 350;
  const std::size_t dim = dt + 1;  // bias column

  // Normal equations A = X^T X + lambda I, B = X^T Y  (Y one-hot of 4 bins).
  std::vector<double> A(dim * dim, 0.0), B(dim * 4, 0.0);
  for (std::size_t i = 0; i < n_train; ++i) {
    const auto& s = d.samples[i];
    std::vector<double> x(dim, 1.0);
    for (std::size_t k = 0; k < dt; ++k) x[k] = s.text.data[k];
    const int bin = data::attributes_of_mask(s.mask).area_bin;
    for (std::size_t r = 0; r < dim; ++r) {
      for (std::size_t c = 0; c < dim; ++c) A[r * dim + c] += x[r] * x[c];
      B[r * 4 + bin] += x[r];
    }
  }
  for (std::size_t r = 0; r < dim; ++r) A[r * dim + r] += 1e-3;

  // Gaussian elimination with partial pivoting.
  std::vector<double> W = B;
  for (std::size_t col = 0; col < dim; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < dim; ++r)
      if (std::abs(A[r * dim + col]) > std::abs(A[piv * dim + col])) piv = r;
    for (std::size_t c = 0; c < dim; ++c) std::swap(A[col * dim + c], A[piv * dim + c]);
    for (std::size_t c = 0; c < 4; ++c) std::swap(W[col * 4 + c], W[piv * 4 + c]);
    const double diag = A[col * dim + col];
    for (std::size_t r = 0; r < dim; ++r) {
      if (r == col) continue;
      const double f = A[r * dim + col] / diag;
      for (std::size_t c = col; c < dim; ++c) A[r * dim + c] -= f * A[col * dim + c];
      for (std::size_t c = 0; c < 4; ++c) W[r * 4 + c] -= f * W[col * 4 + c];
    }
  }
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < 4; ++c) W[r * 4 + c] /= A[r * dim + r];

  std::size_t correct = 0, total = 0;
  for (std::size_t i = n_train; i < d.size(); ++i) {
    const auto& s = d.samples[i];
    std::vector<double> x(dim, 1.0);
    for (std::size_t k = 0; k < dt; ++k) x[k] = s.text.data[k];
    double best = -1e30;
    int arg = 0;
    for (int c = 0; c < 4; ++c) {
      double score = 0;
      for (std::size_t r = 0; r < dim; ++r) score += x[r] * W[r * 4 + c];
      if (score > best) {
        best = score;
        arg = c;
      }
    }
    correct += arg == data::attributes_of_mask(s.mask).area_bin;
    ++total;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(total);
  CHECK(acc > 0.90);
}

TEST_CASE("subsample reproduces the published low-data counts") {
  const double fr[4] = {0.25, 0.10, 0.05, 0.01};
  const std::size_t q[4] = {1429, 572, 286, 57};
  const std::size_t m[4] = {546, 218, 109, 22};
  for (int i = 0; i < 4; ++i) {
    CHECK(data::subsample_count(fr[i], 5716) == q[i]);
    CHECK(data::subsample_count(fr[i], 2183) == m[i]);
  }
}

TEST_CASE("subsample is deterministic, a subset, and identity at fraction 1") {
  const data::Dataset d = data::generate_synthetic(40, 16, 4, 5);
  const data::Dataset s1 = data::subsample(d, 0.25, 9);
  const data::Dataset s2 = data::subsample(d, 0.25, 9);
  REQUIRE(s1.size() == 10);
  for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s1.samples[i].id == s2.samples[i].id);

  const data::Dataset s3 = data::subsample(d, 0.25, 10);
  bool same = s3.size() == s1.size();
  if (same)
    for (std::size_t i = 0; i < s1.size(); ++i)
      same = same && s1.samples[i].id == s3.samples[i].id;
  CHECK_FALSE(same);

  std::set<std::string> ids;
  for (const auto& s : d.samples) ids.insert(s.id);
  for (const auto& s : s1.samples) CHECK(ids.count(s.id) == 1);

  const data::Dataset full = data::subsample(d, 1.0, 3);
  REQUIRE(full.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    CHECK(full.samples[i].id == d.samples[i].id);

  CHECK(data::subsample(d, 0.001, 1).size() == 1);  // max(1, round) floor
  CHECK_THROWS_AS(data::subsample(d, 0.0, 1), data::DataError);
  CHECK_THROWS_AS(data::subsample(d, 1.5, 1), data::DataError);
}
