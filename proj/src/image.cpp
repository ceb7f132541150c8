#include "neon/image.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace neon {

namespace {

// Reads one whitespace/comment-delimited token of a PNM header.
std::string next_token(std::istream& is) {
  std::string tok;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw std::runtime_error("pnm: truncated header");
  return tok;
}

void read_header(std::istream& is, const char* magic, int& w, int& h) {
  const std::string m = next_token(is);
  if (m != magic) throw std::runtime_error(std::string("pnm: expected ") + magic + ", got " + m);
  w = std::stoi(next_token(is));
  h = std::stoi(next_token(is));
  const int maxval = std::stoi(next_token(is));
  if (w <= 0 || h <= 0) throw std::runtime_error("pnm: bad extents");
  if (maxval != 255) throw std::runtime_error("pnm: only maxval 255 supported");
  // The single whitespace byte after maxval was consumed by next_token.
}

}  // namespace

void save_ppm(const std::string& path, const Frame& frame) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("ppm: cannot open " + path + " for writing");
  os << "P6\n" << frame.width << " " << frame.height << "\n255\n";
  // PPM stores R,G,B; frames hold B,G,R.
  for (std::size_t i = 0; i < frame.bgr.size(); i += 3) {
    const char rgb[3] = {static_cast<char>(frame.bgr[i + 2]), static_cast<char>(frame.bgr[i + 1]),
                         static_cast<char>(frame.bgr[i])};
    os.write(rgb, 3);
  }
  if (!os) throw std::runtime_error("ppm: write failed for " + path);
}

Frame load_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("ppm: cannot open " + path);
  int w = 0, h = 0;
  read_header(is, "P6", w, h);
  Frame frame(w, h);
  std::vector<char> raw(frame.bgr.size());
  is.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!is) throw std::runtime_error("ppm: truncated pixel data in " + path);
  for (std::size_t i = 0; i < raw.size(); i += 3) {
    frame.bgr[i] = static_cast<std::uint8_t>(raw[i + 2]);
    frame.bgr[i + 1] = static_cast<std::uint8_t>(raw[i + 1]);
    frame.bgr[i + 2] = static_cast<std::uint8_t>(raw[i]);
  }
  return frame;
}

void save_pgm(const std::string& path, const GrayFrame& image) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("pgm: cannot open " + path + " for writing");
  os << "P5\n" << image.width << " " << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.v.data()),
           static_cast<std::streamsize>(image.v.size()));
  if (!os) throw std::runtime_error("pgm: write failed for " + path);
}

GrayFrame load_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("pgm: cannot open " + path);
  int w = 0, h = 0;
  read_header(is, "P5", w, h);
  GrayFrame image(w, h);
  is.read(reinterpret_cast<char*>(image.v.data()),
          static_cast<std::streamsize>(image.v.size()));
  if (!is) throw std::runtime_error("pgm: truncated pixel data in " + path);
  return image;
}

void save_observation_pgm(const std::string& path, const BinaryImage& image) {
  GrayFrame gray(image.width, image.height);
  for (std::size_t i = 0; i < image.v.size(); ++i) gray.v[i] = image.v[i] ? 255 : 0;
  save_pgm(path, gray);
}

BinaryImage load_observation_pgm(const std::string& path) {
  GrayFrame gray = load_pgm(path);
  BinaryImage image(gray.width, gray.height);
  for (std::size_t i = 0; i < gray.v.size(); ++i) image.v[i] = gray.v[i] >= 128 ? 1 : 0;
  return image;
}

}  // namespace neon
