#include <doctest.h>

#include <jpeglib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ets/data.hpp"
#include "ets/image.hpp"
#include "ets/image_io.hpp"
#include "support/oracles.hpp"
#include "support/toydata.hpp"

namespace fs = std::filesystem;
using namespace ets;

namespace {

void write_jpeg(const std::string& path, const Tensor<Real>& img) {
  FILE* f = std::fopen(path.c_str(), "wb");
  REQUIRE(f);
  jpeg_compress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f);
  cinfo.image_width = img.w();
  cinfo.image_height = img.h();
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, 95, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  std::vector<uint8_t> row(static_cast<size_t>(img.w()) * 3);
  const Eigen::Index plane = static_cast<Eigen::Index>(img.h()) * img.w();
  while (cinfo.next_scanline < cinfo.image_height) {
    for (int x = 0; x < img.w(); ++x)
      for (int c = 0; c < 3; ++c)
        row[3 * x + c] = static_cast<uint8_t>(
            std::lround(img.data()[c * plane + cinfo.next_scanline * img.w() + x] * 255));
    uint8_t* rp = row.data();
    jpeg_write_scanlines(&cinfo, &rp, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(f);
}

void write_bmp24(const std::string& path, const Tensor<Real>& img) {
  const int W = img.w(), H = img.h();
  const int stride = (W * 3 + 3) & ~3;
  const int data_size = stride * H;
  std::vector<uint8_t> out(54 + data_size, 0);
  out[0] = 'B';
  out[1] = 'M';
  auto put32 = [&](size_t o, uint32_t v) {
    out[o] = v & 0xFF;
    out[o + 1] = (v >> 8) & 0xFF;
    out[o + 2] = (v >> 16) & 0xFF;
    out[o + 3] = (v >> 24) & 0xFF;
  };
  put32(2, 54 + data_size);
  put32(10, 54);
  put32(14, 40);
  put32(18, static_cast<uint32_t>(W));
  put32(22, static_cast<uint32_t>(H));
  out[26] = 1;
  out[28] = 24;
  const Eigen::Index plane = static_cast<Eigen::Index>(H) * W;
  for (int y = 0; y < H; ++y) {
    uint8_t* rowp = out.data() + 54 + stride * (H - 1 - y);
    for (int x = 0; x < W; ++x) {
      rowp[3 * x + 2] = static_cast<uint8_t>(std::lround(img.data()[0 * plane + y * W + x] * 255));
      rowp[3 * x + 1] = static_cast<uint8_t>(std::lround(img.data()[1 * plane + y * W + x] * 255));
      rowp[3 * x + 0] = static_cast<uint8_t>(std::lround(img.data()[2 * plane + y * W + x] * 255));
    }
  }
  std::ofstream o(path, std::ios::binary);
  o.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("train split: all normal, zero masks, deterministic order") {
  const std::string dir = testutil::scratch_dir("data_train");
  auto toy = testutil::write_toy_dataset(dir, 5, 0, 0, 32, 1);

  DatasetSpec spec{toy.root, toy.category, 32, Split::kTrain};
  Dataset ds = load_split(spec);
  CHECK(ds.items.size() == 5);
  for (const auto& item : ds.items) {
    CHECK(item.label == 0);
    CHECK(item.mask.array().sum() == Real(0));
    CHECK(item.image.h() == 32);
  }
  Dataset ds2 = load_split(spec);
  REQUIRE(ds2.items.size() == ds.items.size());
  for (size_t i = 0; i < ds.items.size(); ++i) {
    CHECK(ds.items[i].path == ds2.items[i].path);
    for (Eigen::Index e = 0; e < ds.items[i].image.size(); ++e)
      CHECK(ds.items[i].image.data()[e] == ds2.items[i].image.data()[e]);
  }
}

TEST_CASE("test split: labels, masks and the label<->mask invariant") {
  const std::string dir = testutil::scratch_dir("data_test");
  auto toy = testutil::write_toy_dataset(dir, 1, 3, 2, 32, 2);
  DatasetSpec spec{toy.root, toy.category, 32, Split::kTest};
  Dataset ds = load_split(spec);
  CHECK(ds.items.size() == 5);
  int anom = 0;
  for (const auto& item : ds.items) {
    const bool has_pos = item.mask.array().sum() > Real(0);
    CHECK((item.label == 1) == has_pos);
    anom += item.label;
    // Masks stay strictly binary after resizing.
    for (Eigen::Index e = 0; e < item.mask.size(); ++e)
      CHECK((item.mask.data()[e] == Real(0) || item.mask.data()[e] == Real(1)));
  }
  CHECK(anom == 2);
  // Lexicographic by path: test/defect/* precedes test/good/*.
  CHECK(ds.items.front().label == 1);
  CHECK(ds.items.back().label == 0);
}

TEST_CASE("layout errors name the missing piece") {
  const std::string dir = testutil::scratch_dir("data_err");
  auto toy = testutil::write_toy_dataset(dir, 2, 1, 1, 32, 3);

  DatasetSpec bad{toy.root, "nonexistent", 32, Split::kTrain};
  CHECK_THROWS_WITH_AS(load_split(bad), doctest::Contains("nonexistent"), Error);

  // Anomalous image without a mask file.
  fs::remove(fs::path(toy.root) / toy.category / "ground_truth" / "defect" / "000_mask.png");
  DatasetSpec spec{toy.root, toy.category, 32, Split::kTest};
  CHECK_THROWS_WITH_AS(load_split(spec), doctest::Contains("no mask file"), Error);
}

TEST_CASE("manifest loading mirrors the folder layout") {
  const std::string dir = testutil::scratch_dir("data_manifest");
  auto toy = testutil::write_toy_dataset(dir, 4, 2, 2, 32, 4);
  Dataset train = load_manifest(toy.manifest, Split::kTrain, 32);
  CHECK(train.items.size() == 4);
  Dataset test = load_manifest(toy.manifest, Split::kTest, 32);
  CHECK(test.items.size() == 4);
  int anom = 0;
  for (const auto& item : test.items) anom += item.label;
  CHECK(anom == 2);
  CHECK_THROWS_AS(load_manifest(dir + "/nope.jsonl", Split::kTrain, 32), Error);
}

TEST_CASE("resize: constants, identity, checkerboard averaging") {
  Tensor<Real> c = Tensor<Real>::constant(1, 3, 10, 10, Real(0.5));
  Tensor<Real> r = resize_image(c, 7);
  for (Eigen::Index i = 0; i < r.size(); ++i)
    CHECK(r.data()[i] == doctest::Approx(0.5).epsilon(1e-6));

  Tensor<Real> same = resize_image(c, 10);
  for (Eigen::Index i = 0; i < c.size(); ++i) CHECK(same.data()[i] == c.data()[i]);  // bit-exact

  Tensor<Real> checker(1, 1, 8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) checker(0, 0, y, x) = static_cast<Real>((x + y) % 2);
  Tensor<Real> down = bilinear_resize(checker, 4, 4);
  for (Eigen::Index i = 0; i < down.size(); ++i) CHECK(down.data()[i] == Real(0.5));

  CHECK_THROWS_AS(resize_image(c, 0), Error);
  CHECK_THROWS_AS(resize_image(c, -3), Error);
}

TEST_CASE("mask resize: 70x70 square in 700x700 lands near the scaled area") {
  Tensor<Real> mask = Tensor<Real>::zeros(1, 1, 700, 700);
  for (int y = 315; y < 385; ++y)
    for (int x = 315; x < 385; ++x) mask(0, 0, y, x) = 1;
  Tensor<Real> resized = resize_mask_binary(mask, 256);

  // Reference resampler route.
  Tensor<Real> ref = oracle::bilinear(mask, 256, 256);
  ref.array() = (ref.array() > Real(0.5)).cast<Real>();
  for (Eigen::Index i = 0; i < ref.size(); ++i) CHECK(resized.data()[i] == ref.data()[i]);

  const double area = resized.array().sum();
  const double expected = (70.0 / 700.0 * 256) * (70.0 / 700.0 * 256);  // 655.36
  CHECK(std::abs(area - expected) < 60);
  for (Eigen::Index i = 0; i < resized.size(); ++i)
    CHECK((resized.data()[i] == Real(0) || resized.data()[i] == Real(1)));
}

TEST_CASE("PNG/JPEG/BMP decode to matching RGB tensors") {
  const std::string dir = testutil::scratch_dir("codecs");
  Rng rng = Rng::seeded(6);
  Tensor<Real> img = testutil::make_stripe_image(24, rng);
  save_png(dir + "/img.png", img);
  write_jpeg(dir + "/img.jpg", img);
  write_bmp24(dir + "/img.bmp", img);

  Tensor<Real> png = load_image_rgb(dir + "/img.png");
  Tensor<Real> jpg = load_image_rgb(dir + "/img.jpg");
  Tensor<Real> bmp = load_image_rgb(dir + "/img.bmp");
  REQUIRE(png.shape() == img.shape());
  REQUIRE(jpg.shape() == img.shape());
  REQUIRE(bmp.shape() == img.shape());
  double png_err = 0, jpg_err = 0, bmp_err = 0;
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    png_err = std::max(png_err, std::abs(static_cast<double>(png.data()[i]) - img.data()[i]));
    jpg_err = std::max(jpg_err, std::abs(static_cast<double>(jpg.data()[i]) - img.data()[i]));
    bmp_err = std::max(bmp_err, std::abs(static_cast<double>(bmp.data()[i]) - img.data()[i]));
  }
  CHECK(png_err < 1.0 / 255 + 1e-6);  // 8-bit quantization only
  CHECK(bmp_err < 1.0 / 255 + 1e-6);
  CHECK(jpg_err < 0.15);  // lossy

  // Masks must be single-channel PNG.
  CHECK_THROWS_AS(load_mask_png(dir + "/img.png"), Error);   // 3 channels
  CHECK_THROWS_AS(load_mask_png(dir + "/img.bmp"), Error);   // not PNG
  CHECK_THROWS_AS(load_image_rgb(dir + "/missing.png"), Error);
}

TEST_CASE("channel normalization applies the pretraining statistics") {
  Tensor<Real> img = Tensor<Real>::constant(1, 3, 2, 2, Real(0.5));
  Tensor<Real> norm = normalize_pretrain(img);
  for (int c = 0; c < 3; ++c)
    CHECK(norm(0, c, 0, 0) ==
          doctest::Approx((0.5 - kPretrainMean[c]) / kPretrainStd[c]).epsilon(1e-6));
}

}  // TEST_SUITE
