#include "patchprint/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "patchprint/errors.hpp"

namespace patchprint {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// ---- PNG ----

struct PngReadCtx {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadCtx() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  (void)msg;
  longjmp(png_jmpbuf(png), 1);
}
void png_warn_fn(png_structp, png_const_charp) {}

Image load_png(std::FILE* f, const std::string& path) {
  PngReadCtx ctx;
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
  if (!ctx.png) throw IoError("png: allocation failure");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw IoError("png: allocation failure");

  std::vector<png_bytep> rows;
  std::vector<unsigned char> pixels;
  if (setjmp(png_jmpbuf(ctx.png)))
    throw CorruptData("corrupt PNG: " + path);

  png_init_io(ctx.png, f);
  png_read_info(ctx.png, ctx.info);

  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(ctx.png, ctx.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
  if (bit_depth == 16) png_set_strip_16(ctx.png);
  png_set_strip_alpha(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  const int channels = png_get_channels(ctx.png, ctx.info);
  if (channels != 1 && channels != 3)
    throw UnsupportedFormat("png: unexpected channel count in " + path);

  const size_t rowbytes = png_get_rowbytes(ctx.png, ctx.info);
  pixels.resize(rowbytes * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);

  Image img(static_cast<int>(h), static_cast<int>(w), channels);
  const size_t n = img.data.size();
  for (size_t i = 0; i < n; ++i) img.data[i] = pixels[i] / 255.f;
  return img;
}

// ---- JPEG ----

struct JpegErr {
  jpeg_error_mgr mgr;
  std::jmp_buf jb;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  JpegErr* err = reinterpret_cast<JpegErr*>(cinfo->err);
  longjmp(err->jb, 1);
}
void jpeg_emit_message(j_common_ptr, int) {}

Image load_jpeg(std::FILE* f, const std::string& path) {
  jpeg_decompress_struct cinfo;
  JpegErr err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  err.mgr.emit_message = jpeg_emit_message;

  std::vector<unsigned char> row;
  Image img;
  if (setjmp(err.jb)) {
    jpeg_destroy_decompress(&cinfo);
    throw CorruptData("corrupt JPEG: " + path);
  }

  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.jpeg_color_space == JCS_GRAYSCALE ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);

  const int channels = cinfo.output_components;
  if (channels != 1 && channels != 3) {
    jpeg_destroy_decompress(&cinfo);
    throw UnsupportedFormat("jpeg: unexpected channel count in " + path);
  }
  img = Image(static_cast<int>(cinfo.output_height), static_cast<int>(cinfo.output_width), channels);
  row.resize(static_cast<size_t>(cinfo.output_width) * channels);
  unsigned char* rowp = row.data();
  while (cinfo.output_scanline < cinfo.output_height) {
    const int y = static_cast<int>(cinfo.output_scanline);
    jpeg_read_scanlines(&cinfo, &rowp, 1);
    float* dst = &img.data[static_cast<size_t>(y) * img.width * channels];
    for (size_t i = 0; i < row.size(); ++i) dst[i] = row[i] / 255.f;
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

}  // namespace

Image load_image(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw FileNotFound("no such file: " + path);

  unsigned char magic[8] = {0};
  const size_t got = std::fread(magic, 1, sizeof magic, f.get());
  std::rewind(f.get());

  static const unsigned char png_sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (got >= 8 && std::memcmp(magic, png_sig, 8) == 0) return load_png(f.get(), path);
  if (got >= 3 && magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF)
    return load_jpeg(f.get(), path);
  throw UnsupportedFormat("not a PNG or JPEG: " + path);
}

void save_png(const Image& img, const std::string& path) {
  if (img.empty()) throw EmptyInput("save_png: empty image");
  if (img.channels != 1 && img.channels != 3)
    throw ShapeMismatch("save_png: expected 1 or 3 channels");

  std::vector<unsigned char> pixels(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) {
    const float v = std::round(img.data[i] * 255.f);
    pixels[i] = static_cast<unsigned char>(std::clamp(v, 0.f, 255.f));
  }

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
  if (!png) throw IoError("png: allocation failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png: allocation failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: write failure: " + path);
  }

  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width, img.height, 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const size_t rowbytes = static_cast<size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, pixels.data() + static_cast<size_t>(y) * rowbytes);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace patchprint
