#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "pmag/errors.hpp"
#include "pmag/io_formats.hpp"

namespace pmag {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors through longjmp; the message is stashed here first.
struct PngErrorState {
  std::string message;
};

void on_png_error(png_structp png, png_const_charp msg) {
  if (auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png))) state->message = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

class ReadHandle {
 public:
  explicit ReadHandle(PngErrorState* err)
      : png_(png_create_read_struct(PNG_LIBPNG_VER_STRING, err, on_png_error, on_png_warning)) {
    if (!png_) throw IoError("png_create_read_struct failed");
    info_ = png_create_info_struct(png_);
    if (!info_) {
      png_destroy_read_struct(&png_, nullptr, nullptr);
      throw IoError("png_create_info_struct failed");
    }
  }
  ~ReadHandle() { png_destroy_read_struct(&png_, &info_, nullptr); }
  ReadHandle(const ReadHandle&) = delete;
  ReadHandle& operator=(const ReadHandle&) = delete;

  png_structp png() const { return png_; }
  png_infop info() const { return info_; }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

class WriteHandle {
 public:
  explicit WriteHandle(PngErrorState* err)
      : png_(png_create_write_struct(PNG_LIBPNG_VER_STRING, err, on_png_error, on_png_warning)) {
    if (!png_) throw IoError("png_create_write_struct failed");
    info_ = png_create_info_struct(png_);
    if (!info_) {
      png_destroy_write_struct(&png_, nullptr);
      throw IoError("png_create_info_struct failed");
    }
  }
  ~WriteHandle() { png_destroy_write_struct(&png_, &info_); }
  WriteHandle(const WriteHandle&) = delete;
  WriteHandle& operator=(const WriteHandle&) = delete;

  png_structp png() const { return png_; }
  png_infop info() const { return info_; }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

// Shape of a decoded image, filled in before the pixel rows are read.
struct PngLayout {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
};

// Returns false after a longjmp; no C++ objects with destructors live in
// this frame.
bool read_png_rows(png_structp png, png_infop info, std::FILE* fp, PngLayout& layout,
                   std::vector<png_byte>& rows_out, bool& unsupported) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, fp);
  png_read_info(png, info);
  layout.width = png_get_image_width(png, info);
  layout.height = png_get_image_height(png, info);
  layout.bit_depth = png_get_bit_depth(png, info);
  layout.color_type = png_get_color_type(png, info);
  if (layout.bit_depth != 8 || (layout.color_type & PNG_COLOR_MASK_PALETTE)) {
    unsupported = true;
    return true;
  }
  if (layout.color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  rows_out.resize(stride * layout.height);
  std::vector<png_bytep> rows(layout.height);
  for (png_uint_32 r = 0; r < layout.height; ++r) rows[r] = rows_out.data() + r * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  return true;
}

bool write_png_rows(png_structp png, png_infop info, std::FILE* fp, png_uint_32 width,
                    png_uint_32 height, int color_type, std::vector<png_bytep>& rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  return true;
}

}  // namespace

std::uint8_t quantize_unit(double v) {
  const double scaled = std::floor(v * 255.0 + 0.5);
  if (!(scaled > 0.0)) return 0;
  if (scaled >= 255.0) return 255;
  return static_cast<std::uint8_t>(scaled);
}

ImageBuffer read_image(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path.string() + ": not a PNG file");
  }
  std::rewind(fp.get());

  PngErrorState err;
  ReadHandle handle(&err);
  PngLayout layout;
  std::vector<png_byte> data;
  bool unsupported = false;
  if (!read_png_rows(handle.png(), handle.info(), fp.get(), layout, data, unsupported)) {
    throw FormatError(path.string() + ": " + err.message);
  }
  if (unsupported) {
    throw UnsupportedFormatError(path.string() + ": only 8-bit grayscale or RGB PNGs are supported");
  }
  const std::size_t channels = (layout.color_type & PNG_COLOR_MASK_COLOR) ? 3 : 1;
  std::vector<double> pixels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) pixels[i] = static_cast<double>(data[i]) / 255.0;
  return ImageBuffer(layout.height, layout.width, channels, std::move(pixels));
}

void write_image(const std::filesystem::path& path, const ImageBuffer& image) {
  const std::size_t stride = image.width() * image.channels();
  std::vector<png_byte> data(stride * image.height());
  const auto px = image.pixels();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = quantize_unit(px[i]);
  std::vector<png_bytep> rows(image.height());
  for (std::size_t r = 0; r < image.height(); ++r) rows[r] = data.data() + r * stride;

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  PngErrorState err;
  WriteHandle handle(&err);
  const int color = image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  if (!write_png_rows(handle.png(), handle.info(), fp.get(),
                      static_cast<png_uint_32>(image.width()),
                      static_cast<png_uint_32>(image.height()), color, rows)) {
    throw IoError(path.string() + ": " + err.message);
  }
}

}  // namespace pmag
