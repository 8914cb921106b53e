#include "ets/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace ets {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail("io", "cannot open " + path);
  return f;
}

// ---- PNG ----

struct PngImage {
  int width = 0, height = 0, channels = 0;
  std::vector<uint8_t> pixels;  // row-major, interleaved, 8-bit
};

PngImage read_png(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("io", "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("io", "libpng init failed");
  }
  PngImage img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("io", "corrupt PNG: " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  png_byte color = png_get_color_type(png, info);
  png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = static_cast<int>(png_get_channels(png, info));
  const size_t rowbytes = png_get_rowbytes(png, info);
  img.pixels.resize(rowbytes * img.height);
  rows.resize(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

// ---- JPEG ----

struct JpegErr {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

void jpeg_err_exit(j_common_ptr cinfo) {
  std::longjmp(reinterpret_cast<JpegErr*>(cinfo->err)->jump, 1);
}

PngImage read_jpeg(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  jpeg_decompress_struct cinfo;
  JpegErr err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_err_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    fail("io", "corrupt JPEG: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  PngImage img;
  img.width = static_cast<int>(cinfo.output_width);
  img.height = static_cast<int>(cinfo.output_height);
  img.channels = 3;
  img.pixels.resize(static_cast<size_t>(img.width) * img.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    uint8_t* row = img.pixels.data() + static_cast<size_t>(cinfo.output_scanline) * img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

// ---- BMP (uncompressed 24/32-bit) ----

PngImage read_bmp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open " + path);
  std::vector<uint8_t> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto u16 = [&](size_t o) { return raw[o] | (raw[o + 1] << 8); };
  auto u32 = [&](size_t o) {
    return static_cast<uint32_t>(raw[o]) | (raw[o + 1] << 8) | (raw[o + 2] << 16) |
           (static_cast<uint32_t>(raw[o + 3]) << 24);
  };
  if (raw.size() < 54 || raw[0] != 'B' || raw[1] != 'M') fail("io", "not a BMP file: " + path);
  const uint32_t offset = u32(10);
  const int32_t width = static_cast<int32_t>(u32(18));
  int32_t height = static_cast<int32_t>(u32(22));
  const int bpp = u16(28);
  const uint32_t compression = u32(30);
  if (compression != 0 || (bpp != 24 && bpp != 32))
    fail("io", "unsupported BMP variant (only uncompressed 24/32-bit): " + path);
  const bool flip = height > 0;
  if (height < 0) height = -height;
  PngImage img;
  img.width = width;
  img.height = height;
  img.channels = 3;
  img.pixels.resize(static_cast<size_t>(width) * height * 3);
  const size_t stride = ((static_cast<size_t>(width) * bpp / 8) + 3) & ~size_t(3);
  if (raw.size() < offset + stride * height) fail("io", "truncated BMP: " + path);
  for (int y = 0; y < height; ++y) {
    const uint8_t* src = raw.data() + offset + stride * (flip ? height - 1 - y : y);
    uint8_t* dst = img.pixels.data() + static_cast<size_t>(y) * width * 3;
    for (int x = 0; x < width; ++x) {
      dst[3 * x + 0] = src[x * (bpp / 8) + 2];
      dst[3 * x + 1] = src[x * (bpp / 8) + 1];
      dst[3 * x + 2] = src[x * (bpp / 8) + 0];
    }
  }
  return img;
}

PngImage read_any(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open " + path);
  uint8_t magic[4] = {0, 0, 0, 0};
  in.read(reinterpret_cast<char*>(magic), 4);
  in.close();
  if (magic[0] == 0x89 && magic[1] == 'P') return read_png(path);
  if (magic[0] == 0xFF && magic[1] == 0xD8) return read_jpeg(path);
  if (magic[0] == 'B' && magic[1] == 'M') return read_bmp(path);
  fail("io", "unsupported image format (PNG/JPEG/BMP accepted): " + path);
}

}  // namespace

Tensor<Real> load_image_rgb(const std::string& path) {
  PngImage img = read_any(path);
  Tensor<Real> out(1, 3, img.height, img.width);
  const Eigen::Index plane = static_cast<Eigen::Index>(img.height) * img.width;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const uint8_t* px = img.pixels.data() + (static_cast<size_t>(y) * img.width + x) * img.channels;
      for (int c = 0; c < 3; ++c) {
        // Grayscale broadcasts to all channels; alpha is dropped.
        const uint8_t v = px[img.channels >= 3 ? c : 0];
        out.data()[c * plane + y * img.width + x] = static_cast<Real>(v) / Real(255);
      }
    }
  }
  return out;
}

Tensor<Real> load_mask_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open " + path);
  uint8_t magic[2] = {0, 0};
  in.read(reinterpret_cast<char*>(magic), 2);
  in.close();
  if (!(magic[0] == 0x89 && magic[1] == 'P')) fail("io", "masks must be PNG: " + path);
  PngImage img = read_png(path);
  if (img.channels != 1)
    fail("io", "masks must be single-channel PNG, got " + std::to_string(img.channels) +
                   " channels: " + path);
  Tensor<Real> out(1, 1, img.height, img.width);
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out.data()[i] = img.pixels[i] ? Real(1) : Real(0);
  return out;
}

void save_png(const std::string& path, const Tensor<Real>& img) {
  if (img.n() != 1 || (img.c() != 1 && img.c() != 3))
    fail("io", "save_png: expected (1,1,H,W) or (1,3,H,W), got " + img.shape_str());
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) fail("io", "libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("io", "PNG write failed: " + path);
  }
  png_init_io(png, f.get());
  const int H = img.h(), W = img.w(), C = img.c();
  png_set_IHDR(png, info, W, H, 8, C == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(static_cast<size_t>(W) * C);
  const Eigen::Index plane = static_cast<Eigen::Index>(H) * W;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        Real v = img.data()[c * plane + y * static_cast<Eigen::Index>(W) + x];
        v = std::min(Real(1), std::max(Real(0), v));
        row[static_cast<size_t>(x) * C + c] = static_cast<uint8_t>(std::lround(v * 255));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace ets
