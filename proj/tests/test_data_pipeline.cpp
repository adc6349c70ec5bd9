// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "testutil.hpp"
#include "weathercycle/data_pipeline.hpp"
#include "weathercycle/errors.hpp"
#include "weathercycle/image_io.hpp"

using namespace weathercycle;
using wctest::random_tensor;
namespace fs = std::filesystem;

namespace {

// Unique on-disk fixture tree, removed on scope exit.
struct TempTree {
  fs::path root;
  explicit TempTree(const std::string& tag) {
    static int counter = 0;
    root = fs::temp_directory_path() /
           ("wc_pipeline_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(root);
  }
  ~TempTree() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
  std::string dir(const std::string& name) const {
    fs::create_directories(root / name);
    return (root / name).string();
  }
};

RgbImage write_random_png(const std::string& dir, const std::string& name, int h, int w,
                          wctest::Rng& rng) {
  RgbImage img(random_tensor({3, h, w}, rng));
  save_image(img, (fs::path(dir) / name).string());
  return load_image((fs::path(dir) / name).string());  // post-quantization reference
}

void write_constant_png(const std::string& dir, const std::string& name, int h, int w, double v) {
  save_image(RgbImage(Tensor({3, h, w}, v)), (fs::path(dir) / name).string());
}

void write_garbage(const std::string& dir, const std::string& name) {
  std::ofstream out(fs::path(dir) / name, std::ios::binary);
  out << "this is not an image";
}

AugmentConfig noop_aug() {
  AugmentConfig aug;
  aug.hflip_prob = 0.0;
  aug.rot90_choices = {0};
  aug.jitter_brightness = aug.jitter_contrast = aug.jitter_saturation = 0.0;
  return aug;
}

}  // namespace

TEST_CASE("image files survive an encode/decode round trip") {
  TempTree tree("io");
  wctest::Rng rng(60);
  RgbImage img(random_tensor({3, 12, 9}, rng));
  const std::string path = (fs::path(tree.root) / "x.png").string();
  save_image(img, path);
  RgbImage back = load_image(path);
  CHECK(back.height() == 12);
  CHECK(back.width() == 9);
  CHECK(max_abs_diff(back.data, img.data) <= 0.5 / 255.0 + 1e-12);
  // decode of an encode of a decode is stable: values are already quantized
  save_image(back, path);
  CHECK(max_abs_diff(load_image(path).data, back.data) == 0.0);

  int h = 0, w = 0;
  CHECK(probe_image(path, &h, &w));
  CHECK(h == 12);
  CHECK(w == 9);
  write_garbage(tree.root.string(), "bad.png");
  CHECK_FALSE(probe_image((tree.root / "bad.png").string()));
  CHECK_THROWS_AS(load_image((tree.root / "bad.png").string()), DataError);
  CHECK_THROWS_AS(load_image((tree.root / "absent.png").string()), DataError);
}

TEST_CASE("listing filters by extension, sorts, and repeats identically") {
  TempTree tree("list");
  wctest::Rng rng(61);
  const std::string d = tree.dir("imgs");
  write_random_png(d, "c.png", 8, 8, rng);
  write_random_png(d, "a.jpg", 8, 8, rng);
  write_random_png(d, "b.jpeg", 8, 8, rng);
  write_random_png(d, "z.PNG", 8, 8, rng);
  std::ofstream(fs::path(d) / "notes.txt") << "not an image\n";

  std::vector<std::string> files = list_images(d);
  CHECK(files.size() == 4);
  CHECK(std::is_sorted(files.begin(), files.end()));
  CHECK(files == list_images(d));
  for (const std::string& f : files) CHECK(f.find("notes.txt") == std::string::npos);

  CHECK_THROWS_AS(list_images((tree.root / "nope").string()), DataError);
}

TEST_CASE("a manifest overrides directory scanning") {
  TempTree tree("manifest");
  wctest::Rng rng(62);
  const std::string d = tree.dir("imgs");
  write_random_png(d, "a.png", 8, 8, rng);
  write_random_png(d, "b.png", 8, 8, rng);
  RgbImage outside(random_tensor({3, 8, 8}, rng));
  const std::string abs_path = (tree.root / "outside.png").string();
  save_image(outside, abs_path);

  std::ofstream(fs::path(d) / "manifest.txt")
      << "# fixture manifest\r\n"
      << "  b.png  \r\n"
      << "\n"
      << abs_path << "\n";

  std::vector<std::string> files = list_images(d);
  REQUIRE(files.size() == 2);
  CHECK(std::is_sorted(files.begin(), files.end()));
  CHECK(files[0] == (fs::path(d) / "b.png").string());
  CHECK(files[1] == abs_path);
}

TEST_CASE("unpaired loading reports sizes and skips corrupt files") {
  TempTree tree("load");
  wctest::Rng rng(63);
  const std::string clean = tree.dir("clean"), degraded = tree.dir("degraded");
  for (int i = 0; i < 3; ++i) write_random_png(clean, "c" + std::to_string(i) + ".png", 10, 12, rng);
  for (int i = 0; i < 5; ++i) write_random_png(degraded, "d" + std::to_string(i) + ".png", 9, 8, rng);

  UnpairedDataset ds = load_unpaired(clean, degraded);
  CHECK(ds.clean_paths.size() == 3);
  CHECK(ds.degraded_paths.size() == 5);
  REQUIRE(ds.clean_dims.size() == 3);
  CHECK(ds.clean_dims[0] == std::pair<int, int>(10, 12));
  CHECK(ds.degraded_dims[0] == std::pair<int, int>(9, 8));

  write_garbage(clean, "broken.png");
  CHECK(load_unpaired(clean, degraded).clean_paths.size() == 3);  // still 3: corrupt one skipped

  CHECK_THROWS_AS(load_unpaired(tree.dir("empty"), degraded), DataError);
  CHECK_THROWS_AS(load_unpaired(clean, clean), DataError);       // every path in both domains
  CHECK_THROWS_AS(load_unpaired(clean, degraded, 10), DataError);  // crop 10 > smallest dim 8
  CHECK_NOTHROW(load_unpaired(clean, degraded, 8));
}

TEST_CASE("index sampling is distinct when possible, uniform otherwise") {
  Rng rng(64);
  std::vector<int> perm = sample_indices(10, 10, rng);
  std::set<int> seen(perm.begin(), perm.end());
  CHECK(seen.size() == 10);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 9);

  std::vector<int> three = sample_indices(5, 3, rng);
  CHECK(std::set<int>(three.begin(), three.end()).size() == 3);

  std::vector<int> more = sample_indices(2, 6, rng);
  for (int v : more) CHECK((v == 0 || v == 1));

  CHECK_THROWS_AS(sample_indices(0, 1, rng), DataError);
  CHECK_THROWS_AS(sample_indices(1, 0, rng), DataError);
}

TEST_CASE("a no-op pipeline returns the stored images bit-exactly") {
  TempTree tree("noop");
  wctest::Rng rng(65);
  const std::string clean = tree.dir("clean"), degraded = tree.dir("degraded");
  RgbImage c0 = write_random_png(clean, "c0.png", 16, 16, rng);
  RgbImage d0 = write_random_png(degraded, "d0.png", 16, 16, rng);

  UnpairedDataset ds = load_unpaired(clean, degraded, 16);
  ds.epoch_seed = 5;
  Batch batch = sample_batch(ds, noop_aug(), 1, 0);
  REQUIRE(batch.clean.size() == 1);
  CHECK(max_abs_diff(batch.clean[0], c0.data) == 0.0);
  CHECK(max_abs_diff(batch.degraded[0], d0.data) == 0.0);
}

TEST_CASE("batches are deterministic in the step seed and stay in range") {
  TempTree tree("det");
  wctest::Rng rng(66);
  const std::string clean = tree.dir("clean"), degraded = tree.dir("degraded");
  for (int i = 0; i < 3; ++i) write_random_png(clean, "c" + std::to_string(i) + ".png", 20, 20, rng);
  for (int i = 0; i < 3; ++i)
    write_random_png(degraded, "d" + std::to_string(i) + ".png", 20, 20, rng);

  UnpairedDataset ds = load_unpaired(clean, degraded, 8);
  ds.epoch_seed = 9;
  AugmentConfig aug;  // defaults: flips, rotations, jitter all active
  aug.jitter_brightness = aug.jitter_contrast = aug.jitter_saturation = 0.5;

  Batch a = sample_batch(ds, aug, 4, 3);
  Batch b = sample_batch(ds, aug, 4, 3);
  Batch c = sample_batch(ds, aug, 4, 4);
  REQUIRE(a.clean.size() == 4);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < 4; ++i) {
    if (max_abs_diff(a.clean[i], b.clean[i]) != 0.0) same = false;
    if (max_abs_diff(a.degraded[i], b.degraded[i]) != 0.0) same = false;
    if (max_abs_diff(a.clean[i], c.clean[i]) != 0.0) differs = true;
  }
  CHECK(same);
  CHECK(a.clean_indices == b.clean_indices);
  CHECK(differs);

  for (const Tensor& t : a.clean) {
    CHECK(t.dim(1) == 8);
    CHECK(t.dim(2) == 8);
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(t[i] >= 0.0);
      CHECK(t[i] <= 1.0);
    }
  }

  // unpaired: the two domains draw independently
  bool decoupled = false;
  for (std::uint64_t s = 0; s < 32 && !decoupled; ++s) {
    Batch probe = sample_batch(ds, aug, 1, 100 + s);
    decoupled = probe.clean_indices[0] != probe.degraded_indices[0];
  }
  CHECK(decoupled);

  CHECK_THROWS_AS(sample_batch(ds, aug, 0, 1), DataError);
  UnpairedDataset uncropped = ds;
  uncropped.crop = 0;
  CHECK_THROWS_AS(sample_batch(uncropped, aug, 1, 1), DataError);
}

TEST_CASE("selection frequency is uniform over many steps") {
  TempTree tree("freq");
  wctest::Rng rng(67);
  const std::string clean = tree.dir("clean"), degraded = tree.dir("degraded");
  for (int i = 0; i < 4; ++i) write_random_png(clean, "c" + std::to_string(i) + ".png", 8, 8, rng);
  write_random_png(degraded, "d0.png", 8, 8, rng);

  UnpairedDataset ds = load_unpaired(clean, degraded, 8);
  ds.epoch_seed = 11;
  AugmentConfig aug = noop_aug();
  std::array<int, 4> counts{};
  const int steps = 1250, batch = 8;  // 1e4 clean draws, with replacement (4 < 8)
  for (int s = 0; s < steps; ++s) {
    Batch b = sample_batch(ds, aug, batch, static_cast<std::uint64_t>(s));
    for (int idx : b.clean_indices) counts[static_cast<std::size_t>(idx)] += 1;
  }
  // 3 sigma for Binomial(1e4, 1/4) is ~130
  for (int c : counts) CHECK(std::abs(c - steps * batch / 4) <= 130);
}

TEST_CASE("flips and rotations move pixels to the expected coordinates") {
  Tensor img({3, 8, 8});
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) img.at(c, i, j) = (i + 10.0 * j) / 100.0;

  AugmentConfig aug = noop_aug();
  aug.hflip_prob = 1.0;
  Rng r1(1);
  Tensor flipped = augment_crop(img, 8, aug, r1, true);
  CHECK(flipped.at(0, 0, 0) == doctest::Approx(0.70));  // row 0, col 7 moved to col 0
  CHECK(flipped.at(0, 3, 7) == doctest::Approx(0.03));

  aug = noop_aug();
  aug.rot90_choices = {90};
  Rng r2(1);
  Tensor rotated = augment_crop(img, 8, aug, r2, true);
  // counterclockwise: old top-right corner (0,7) becomes the new top-left
  CHECK(rotated.at(0, 0, 0) == doctest::Approx(0.70));
  CHECK(rotated.at(0, 7, 0) == doctest::Approx(0.00));
  CHECK(rotated.at(0, 0, 7) == doctest::Approx(0.77));

  aug.rot90_choices = {180};
  Rng r3(1);
  Tensor upside = augment_crop(img, 8, aug, r3, true);
  CHECK(upside.at(0, 0, 0) == doctest::Approx(0.77));  // old bottom-right
  CHECK(upside.at(0, 7, 7) == doctest::Approx(0.00));

  CHECK_THROWS_AS(augment_crop(img, 10, noop_aug(), r3, true), DataError);
}

TEST_CASE("augment draws are consumed even when jitter is not applied") {
  wctest::Rng trng(68);
  Tensor img = random_tensor({3, 16, 16}, trng);
  AugmentConfig aug;
  aug.jitter_brightness = aug.jitter_contrast = aug.jitter_saturation = 0.3;

  Rng r1(99), r2(99);
  augment_crop(img, 8, aug, r1, true);
  augment_crop(img, 8, aug, r2, false);
  CHECK(r1.next_double() == r2.next_double());  // streams still aligned
}

TEST_CASE("disabling degraded-domain jitter leaves those crops untouched") {
  TempTree tree("jit");
  wctest::Rng rng(69);
  const std::string clean = tree.dir("clean"), degraded = tree.dir("degraded");
  write_random_png(clean, "c0.png", 16, 16, rng);
  write_random_png(degraded, "d0.png", 16, 16, rng);

  UnpairedDataset ds = load_unpaired(clean, degraded, 8);
  ds.epoch_seed = 4;

  AugmentConfig heavy;
  heavy.hflip_prob = 0.0;
  heavy.rot90_choices = {0};
  heavy.jitter_brightness = heavy.jitter_contrast = heavy.jitter_saturation = 0.3;
  heavy.jitter_degraded = false;

  AugmentConfig off = noop_aug();

  Batch with_jitter = sample_batch(ds, heavy, 2, 7);
  Batch without = sample_batch(ds, off, 2, 7);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(max_abs_diff(with_jitter.degraded[i], without.degraded[i]) == 0.0);
    CHECK(max_abs_diff(with_jitter.clean[i], without.clean[i]) > 0.0);
  }
}

TEST_CASE("validation rejects malformed augment configs") {
  AugmentConfig aug;
  aug.hflip_prob = 1.5;
  CHECK_THROWS_AS(aug.validate(), DataError);
  aug = AugmentConfig{};
  aug.jitter_contrast = -0.1;
  CHECK_THROWS_AS(aug.validate(), DataError);
  aug = AugmentConfig{};
  aug.rot90_choices = {};
  CHECK_THROWS_AS(aug.validate(), DataError);
  aug.rot90_choices = {45};
  CHECK_THROWS_AS(aug.validate(), DataError);
}

TEST_CASE("pools sample the degraded domain only, deterministically") {
  TempTree tree("pool");
  wctest::Rng rng(70);
  const std::string clean = tree.dir("clean"), degraded = tree.dir("degraded");
  write_constant_png(clean, "c0.png", 16, 16, 0.2);
  write_constant_png(degraded, "d0.png", 16, 16, 0.8);
  write_constant_png(degraded, "d1.png", 16, 16, 0.8);

  UnpairedDataset ds = load_unpaired(clean, degraded, 8);
  DegradationPool pool = build_pool(ds, 6, 8, 3);
  REQUIRE(pool.size() == 6);
  for (const Tensor& p : pool.patches) {
    CHECK(p.dim(0) == 8);
    CHECK(p.dim(1) == 8);
    CHECK(mean_value(p) == doctest::Approx(0.8).epsilon(1e-9));  // degraded gray, never 0.2
  }

  // same seed reproduces; a new seed moves the crops on textured content
  const std::string tclean = tree.dir("tclean"), tdeg = tree.dir("tdeg");
  write_constant_png(tclean, "c0.png", 32, 32, 0.2);
  write_random_png(tdeg, "d0.png", 32, 32, rng);
  write_random_png(tdeg, "d1.png", 32, 32, rng);
  UnpairedDataset tds = load_unpaired(tclean, tdeg, 8);
  DegradationPool p1 = build_pool(tds, 4, 8, 1);
  DegradationPool p2 = build_pool(tds, 4, 8, 1);
  DegradationPool p3 = build_pool(tds, 4, 8, 2);
  bool same = true, moved = false;
  for (std::size_t i = 0; i < 4; ++i) {
    if (max_abs_diff(p1.patches[i], p2.patches[i]) != 0.0) same = false;
    if (max_abs_diff(p1.patches[i], p3.patches[i]) != 0.0) moved = true;
  }
  CHECK(same);
  CHECK(moved);

  CHECK_THROWS_AS(build_pool(ds, 0, 8, 1), DataError);
  CHECK_THROWS_AS(build_pool(ds, 1, 4, 1), DataError);
  CHECK_THROWS_AS(build_pool(ds, 1, 64, 1), DataError);
}
