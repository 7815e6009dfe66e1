#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

#include "abfr/errors.hpp"
#include "abfr/features.hpp"
#include "abfr/rng.hpp"
#include "abfr/synthetic.hpp"
#include "abfr/volume.hpp"
#include "oracles.hpp"

using namespace abfr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "abfr_test_volume";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream os(p, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> header(const char* magic, unsigned char version, std::uint32_t t, std::uint32_t x,
                                  std::uint32_t y, std::uint32_t z) {
  std::vector<unsigned char> b(magic, magic + 4);
  b.push_back(version);
  for (std::uint32_t v : {t, x, y, z})
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
  return b;
}

ParseErrorKind parse_kind(const fs::path& p) {
  try {
    read_volume(p);
  } catch (const ParseError& e) {
    return e.kind();
  }
  FAIL("expected ParseError");
  return ParseErrorKind::io;
}

// Region-level FC (upper triangle) of one subject, computed voxel by voxel.
std::vector<double> region_fc(const FmriVolume& vol, const GrayMatterMask& mask, std::size_t per_axis) {
  const auto d = vol.dims();
  const std::size_t R = per_axis * per_axis * per_axis;
  std::vector<std::vector<double>> sig(R, std::vector<double>(vol.timepoints(), 0.0));
  std::vector<double> count(R, 0.0);
  for (std::size_t x = 0; x < d.x; ++x)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t z = 0; z < d.z; ++z) {
        if (!mask.at(x, y, z)) continue;
        const std::size_t r = ((x * per_axis / d.x) * per_axis + y * per_axis / d.y) * per_axis + z * per_axis / d.z;
        count[r] += 1;
        for (std::size_t t = 0; t < vol.timepoints(); ++t) sig[r][t] += vol.at(t, x, y, z);
      }
  std::vector<double> fc;
  for (std::size_t a = 0; a < R; ++a)
    for (std::size_t b = a + 1; b < R; ++b) fc.push_back(oracle::pearson_direct(sig[a], sig[b]));
  return fc;
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Mean between-class over mean within-class FC distance.
double separation_ratio(const SyntheticCohort& c) {
  std::vector<std::vector<double>> fcs;
  for (const auto& s : c.subjects) fcs.push_back(region_fc(s.volume, c.mask, c.params.regions_per_axis));
  double within = 0, between = 0, nw = 0, nb = 0;
  for (std::size_t i = 0; i < fcs.size(); ++i)
    for (std::size_t j = i + 1; j < fcs.size(); ++j) {
      const double d = distance(fcs[i], fcs[j]);
      if (c.subjects[i].label == c.subjects[j].label) {
        within += d;
        nw += 1;
      } else {
        between += d;
        nb += 1;
      }
    }
  return (between / nb) / (within / nw);
}

}  // namespace

TEST_CASE("volume invariants are enforced") {
  const SpatialDims d{2, 2, 2};
  CHECK_THROWS_AS(FmriVolume(1, d, std::vector<float>(8)), ValidationError);
  CHECK_THROWS_AS(FmriVolume(2, d, std::vector<float>(15)), ValidationError);
  std::vector<float> v(16, 1.0f);
  v[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(FmriVolume(2, d, v), ValidationError);
  CHECK_THROWS_AS(GrayMatterMask(d, std::vector<std::uint8_t>(7)), ValidationError);
  CHECK_THROWS(GrayMatterMask::filled(d, false).bounding_box());
}

TEST_CASE("volume files round trip bit exactly") {
  Rng rng(17);
  const SpatialDims d{5, 3, 7};
  std::vector<float> values(4 * d.voxels());
  for (auto& v : values) v = static_cast<float>(rng.normal(100.0, 20.0));
  std::vector<std::uint8_t> bits(d.voxels());
  for (auto& b : bits) b = rng.bernoulli(0.4);
  const FmriVolume vol(4, d, values);
  const GrayMatterMask mask(d, bits);
  const auto p = scratch("round.abfr");
  write_volume(p, vol, mask);
  const auto back = read_volume(p);
  CHECK(back.volume == vol);
  CHECK(back.mask == mask);
  CHECK(fs::file_size(p) == 4 + 1 + 16 + 4 * values.size() + (d.voxels() + 7) / 8);
}

TEST_CASE("malformed volume files give distinct parse errors") {
  const auto good = header("ABFR", 1, 2, 2, 2, 2);
  auto full = good;
  full.resize(full.size() + 16 * 4 + 1, 0);

  write_bytes(scratch("magic.abfr"), [&] {
    auto b = full;
    b[0] = 'X';
    return b;
  }());
  CHECK(parse_kind(scratch("magic.abfr")) == ParseErrorKind::bad_magic);

  write_bytes(scratch("version.abfr"), [&] {
    auto b = full;
    b[4] = 9;
    return b;
  }());
  CHECK(parse_kind(scratch("version.abfr")) == ParseErrorKind::bad_version);

  auto cut = full;
  cut.resize(cut.size() - 5);
  write_bytes(scratch("short.abfr"), cut);
  CHECK(parse_kind(scratch("short.abfr")) == ParseErrorKind::truncated);

  write_bytes(scratch("header_only.abfr"), {'A', 'B', 'F', 'R', 1, 2, 0});
  CHECK(parse_kind(scratch("header_only.abfr")) == ParseErrorKind::truncated);

  write_bytes(scratch("huge.abfr"), header("ABFR", 1, 4096, 4096, 4096, 4096));
  CHECK(parse_kind(scratch("huge.abfr")) == ParseErrorKind::dim_overflow);

  write_bytes(scratch("zero.abfr"), header("ABFR", 1, 2, 0, 2, 2));
  CHECK(parse_kind(scratch("zero.abfr")) == ParseErrorKind::malformed);

  CHECK(parse_kind(scratch("does_not_exist.abfr")) == ParseErrorKind::io);
}

TEST_CASE("ellipsoid mask fills about pi/6 of the box") {
  for (const SpatialDims d : {SpatialDims{16, 16, 16}, SpatialDims{20, 24, 16}, SpatialDims{32, 32, 32}}) {
    const auto m = ellipsoid_mask(d);
    const double frac = static_cast<double>(m.count()) / static_cast<double>(d.voxels());
    CHECK(std::abs(frac - std::numbers::pi / 6.0) <= 0.05 * std::numbers::pi / 6.0);
  }
}

TEST_CASE("synthetic cohort contract") {
  SyntheticParams p;
  p.n_subjects = 10;
  p.dims = {8, 8, 8};
  p.timepoints = 16;
  const auto a = generate_synthetic_cohort(p);
  const auto b = generate_synthetic_cohort(p);
  REQUIRE(a.subjects.size() == 10);
  std::size_t asd = 0;
  for (std::size_t i = 0; i < a.subjects.size(); ++i) {
    CHECK(a.subjects[i].volume == b.subjects[i].volume);
    CHECK(a.subjects[i].label == b.subjects[i].label);
    CHECK(a.subjects[i].volume.dims() == a.mask.dims());
    asd += a.subjects[i].label == kAsd;
  }
  CHECK(asd == 5);
  CHECK(a.mask == b.mask);

  p.seed = 2;
  const auto c = generate_synthetic_cohort(p);
  CHECK_FALSE(c.subjects[0].volume == a.subjects[0].volume);

  auto bad = p;
  bad.timepoints = 15;
  CHECK_THROWS_AS(generate_synthetic_cohort(bad), ValidationError);
  bad = p;
  bad.n_subjects = 1;
  CHECK_THROWS_AS(generate_synthetic_cohort(bad), ValidationError);
  bad = p;
  bad.effect_size = -1;
  CHECK_THROWS_AS(generate_synthetic_cohort(bad), ValidationError);
  bad = p;
  bad.dims = {8, 0, 8};
  CHECK_THROWS_AS(generate_synthetic_cohort(bad), ValidationError);
}

TEST_CASE("imbalanced generation") {
  SyntheticParams p;
  p.n_subjects = 12;
  p.dims = {8, 8, 8};
  p.timepoints = 16;
  p.asd_fraction = 0.25;
  const auto c = generate_synthetic_cohort(p);
  std::size_t asd = 0;
  for (const auto& s : c.subjects) asd += s.label == kAsd;
  CHECK(asd == 3);
}

TEST_CASE("cohort files round trip") {
  SyntheticParams p;
  p.n_subjects = 4;
  p.dims = {6, 6, 6};
  p.timepoints = 16;
  const auto c = generate_synthetic_cohort(p);
  const auto dir = scratch("cohort");
  const auto index = write_cohort(dir, c, {{"note", 1}});
  const auto m = read_cohort_manifest(index);
  REQUIRE(m.subjects.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(m.subjects[i].id == c.subjects[i].id);
    CHECK(m.subjects[i].label == c.subjects[i].label);
    const auto v = read_volume(m.subjects[i].file);
    CHECK(v.volume == c.subjects[i].volume);
    CHECK(v.mask == c.mask);
  }
  CHECK(synthetic_params_from_json(m.generator).seed == p.seed);
}

TEST_CASE("effect size 2 separates the classes' FC") {
  SyntheticParams p;  // 40 subjects, dims (32, 16, 16, 16)
  p.effect_size = 2.0;
  const auto c = generate_synthetic_cohort(p);
  CHECK(separation_ratio(c) > 1.0);
}

TEST_CASE("separation grows with effect size") {
  const double effects[] = {0.0, 0.5, 1.0, 2.0};
  double mean_ratio[4] = {0, 0, 0, 0};
  std::vector<std::pair<double, double>> points;
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
    for (int e = 0; e < 4; ++e) {
      SyntheticParams p;
      p.n_subjects = 20;
      p.seed = seed;
      p.effect_size = effects[e];
      const double r = separation_ratio(generate_synthetic_cohort(p));
      mean_ratio[e] += r / 10.0;
      points.emplace_back(effects[e], r);
    }
  for (int e = 1; e < 4; ++e) CHECK(mean_ratio[e] > mean_ratio[e - 1]);

  // Spearman correlation between effect size and ratio over all 40 cohorts.
  std::vector<double> xs, ys;
  for (auto [x, y] : points) {
    xs.push_back(x);
    ys.push_back(y);
  }
  const auto rx = oracle::ranks_by_counting(xs), ry = oracle::ranks_by_counting(ys);
  CHECK(oracle::pearson_direct(rx, ry) > 0.0);
}
