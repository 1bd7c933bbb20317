// SPDX-License-Identifier: Apache-2.0
#include "dr3d/image_io.hpp"

#include <png.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dr3d/common.hpp"

namespace dr3d {
namespace {

struct MemReader {
  const unsigned char* p;
  size_t n;
  size_t off;
};

void png_mem_read(png_structp png, png_bytep out, png_size_t count) {
  auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
  if (r->off + count > r->n) png_error(png, "truncated png");
  std::memcpy(out, r->p + r->off, count);
  r->off += count;
}

void png_mem_write(png_structp png, png_bytep data, png_size_t count) {
  auto* buf = static_cast<std::string*>(png_get_io_ptr(png));
  buf->append(reinterpret_cast<char*>(data), count);
}

void png_mem_flush(png_structp) {}

std::string npy_header(const std::vector<size_t>& shape) {
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (";
  for (size_t i = 0; i < shape.size(); ++i) {
    dict += std::to_string(shape[i]);
    if (shape.size() == 1 || i + 1 < shape.size()) dict += ", ";
  }
  if (shape.size() == 1) dict.resize(dict.size() - 1);  // "(n,)"
  dict += "), }";
  size_t total = 10 + dict.size() + 1;  // magic+version+len, dict, newline
  size_t pad = (64 - total % 64) % 64;
  dict.append(pad, ' ');
  dict += '\n';

  std::string out("\x93NUMPY\x01\x00", 8);
  const size_t hlen = dict.size();
  out.push_back((char)(hlen & 0xff));
  out.push_back((char)((hlen >> 8) & 0xff));
  out += dict;
  return out;
}

void append_f32(std::string& out, double v) {
  float f = (float)v;
  char b[4];
  std::memcpy(b, &f, 4);
  out.append(b, 4);
}

}  // namespace

void atomic_write_file(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + tmp);
    f.write(bytes.data(), (std::streamsize)bytes.size());
    if (!f) throw IoError("short write: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename " + tmp + " -> " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read failed: " + path);
  return s;
}

void write_png(const std::string& path, const Tensor& image) {
  if (image.c != 3) throw IoError("png writer expects 3 channels");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::string buf;
  std::vector<unsigned char> row((size_t)image.w * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png encode failed: " + path);
  }
  png_set_write_fn(png, &buf, png_mem_write, png_mem_flush);
  png_set_IHDR(png, info, (png_uint_32)image.w, (png_uint_32)image.h, 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.h; ++y) {
    for (int x = 0; x < image.w; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = clamp(image.at(c, y, x), 0.0, 1.0);
        row[(size_t)x * 3 + c] = (unsigned char)std::lround(v * 255.0);
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  atomic_write_file(path, buf);
}

Tensor read_png(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 8 || png_sig_cmp((png_const_bytep)bytes.data(), 0, 8))
    throw IoError("not a png: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  MemReader rd{(const unsigned char*)bytes.data(), bytes.size(), 0};
  std::vector<unsigned char> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png decode failed: " + path);
  }
  png_set_read_fn(png, &rd, png_mem_read);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_packing(png);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int h = (int)png_get_image_height(png, info);
  const int w = (int)png_get_image_width(png, info);
  if (png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png did not normalize to rgb: " + path);
  }
  pixels.resize((size_t)h * w * 3);
  for (int y = 0; y < h; ++y)
    png_read_row(png, pixels.data() + (size_t)y * w * 3, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor t(3, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        t.at(c, y, x) = pixels[(size_t)(y * w + x) * 3 + c] / 255.0;
  return t;
}

void write_npy(const std::string& path, const Mat& m) {
  std::string out = npy_header({(size_t)m.rows(), (size_t)m.cols()});
  out.reserve(out.size() + (size_t)m.size() * 4);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) append_f32(out, m(r, c));
  atomic_write_file(path, out);
}

void write_npy(const std::string& path, const Tensor& t) {
  std::string out = npy_header({(size_t)t.c, (size_t)t.h, (size_t)t.w});
  out.reserve(out.size() + (size_t)t.data.size() * 4);
  for (Eigen::Index i = 0; i < t.data.size(); ++i) append_f32(out, t.data[i]);
  atomic_write_file(path, out);
}

Mat read_npy_mat(const std::string& path) {
  const std::string s = read_file(path);
  if (s.size() < 10 || s.compare(0, 6, "\x93NUMPY") != 0)
    throw IoError("not an npy file: " + path);
  if ((unsigned char)s[6] != 1) throw IoError("unsupported npy version: " + path);
  const size_t hlen = (unsigned char)s[8] | ((unsigned char)s[9] << 8);
  if (10 + hlen > s.size()) throw IoError("truncated npy header: " + path);
  const std::string hdr = s.substr(10, hlen);
  if (hdr.find("'<f4'") == std::string::npos ||
      hdr.find("'fortran_order': False") == std::string::npos)
    throw IoError("npy reader expects C-order <f4: " + path);
  const size_t lp = hdr.find('(');
  const size_t rp = hdr.find(')');
  if (lp == std::string::npos || rp == std::string::npos || rp < lp)
    throw IoError("bad npy shape: " + path);
  std::vector<size_t> shape;
  size_t pos = lp + 1;
  while (pos < rp) {
    size_t end = hdr.find(',', pos);
    if (end == std::string::npos || end > rp) end = rp;
    std::string tok = hdr.substr(pos, end - pos);
    size_t b = tok.find_first_not_of(" \t");
    if (b != std::string::npos) {
      tok = tok.substr(b);
      if (!tok.empty()) shape.push_back((size_t)std::stoull(tok));
    }
    pos = end + 1;
  }
  if (shape.size() != 2) throw IoError("npy matrix reader expects 2-d shape: " + path);
  const size_t need = 10 + hlen + shape[0] * shape[1] * 4;
  if (s.size() < need) throw IoError("truncated npy data: " + path);
  Mat m((Eigen::Index)shape[0], (Eigen::Index)shape[1]);
  const char* p = s.data() + 10 + hlen;
  for (size_t r = 0; r < shape[0]; ++r)
    for (size_t c = 0; c < shape[1]; ++c) {
      float f;
      std::memcpy(&f, p + (r * shape[1] + c) * 4, 4);
      m((Eigen::Index)r, (Eigen::Index)c) = f;
    }
  return m;
}

}  // namespace dr3d
