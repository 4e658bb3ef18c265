#include "slsim/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "slsim/errors.hpp"
#include "slsim/textfmt.hpp"

static_assert(std::endian::native == std::endian::little,
              "raster writers assume a little-endian host");

namespace slsim {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw io_error("cannot open for writing: " + path);
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw io_error("cannot open for reading: " + path);
    return f;
}

void finish_out(std::ofstream& f, const std::string& path) {
    f.flush();
    if (!f)
        throw io_error("write failed: " + path);
}

// Next whitespace-delimited token, treating '#' to end-of-line as a comment.
std::string pnm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty())
                return tok;
            continue;
        }
        tok.push_back(char(c));
    }
    return tok;
}

void put_u32_be(std::string& out, uint32_t v) {
    out.push_back(char((v >> 24) & 0xff));
    out.push_back(char((v >> 16) & 0xff));
    out.push_back(char((v >> 8) & 0xff));
    out.push_back(char(v & 0xff));
}

void write_png_chunk(std::ofstream& f, const char type[4], const std::string& data) {
    std::string head;
    put_u32_be(head, uint32_t(data.size()));
    head.append(type, 4);
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty())
        crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data()), uInt(data.size()));
    std::string tail;
    put_u32_be(tail, uint32_t(crc));
    f.write(head.data(), std::streamsize(head.size()));
    if (!data.empty())
        f.write(data.data(), std::streamsize(data.size()));
    f.write(tail.data(), std::streamsize(tail.size()));
}

} // namespace

void write_pfm(const ImageD& im, const std::string& path) {
    if (im.channels != 1 && im.channels != 3)
        throw io_error("pfm supports 1 or 3 channels");
    if (im.width <= 0 || im.height <= 0)
        throw io_error("pfm: empty image");
    auto f = open_out(path);
    f << (im.channels == 3 ? "PF" : "Pf") << "\n"
      << im.width << " " << im.height << "\n-1\n";
    std::vector<float> row(size_t(im.width) * im.channels);
    for (int y = im.height - 1; y >= 0; --y) {
        for (int x = 0; x < im.width; ++x)
            for (int c = 0; c < im.channels; ++c)
                row[size_t(x) * im.channels + c] = float(im(y, x, c));
        f.write(reinterpret_cast<const char*>(row.data()),
                std::streamsize(row.size() * sizeof(float)));
    }
    finish_out(f, path);
}

ImageD read_pfm(const std::string& path) {
    auto f = open_in(path);
    std::string magic = pnm_token(f);
    int channels;
    if (magic == "Pf")
        channels = 1;
    else if (magic == "PF")
        channels = 3;
    else
        throw io_error("not a pfm file: " + path);
    int w = parse_int(pnm_token(f), "pfm width");
    int h = parse_int(pnm_token(f), "pfm height");
    double scale = parse_double(pnm_token(f), "pfm scale");
    if (w <= 0 || h <= 0 || scale == 0.0)
        throw io_error("bad pfm header: " + path);
    const bool file_little = scale < 0.0;
    ImageD im(w, h, channels);
    std::vector<unsigned char> row(size_t(w) * channels * 4);
    for (int y = h - 1; y >= 0; --y) {
        f.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size()));
        if (!f)
            throw io_error("truncated pfm data: " + path);
        for (size_t i = 0; i < size_t(w) * channels; ++i) {
            unsigned char b[4];
            std::memcpy(b, row.data() + i * 4, 4);
            if (!file_little)
                std::swap(b[0], b[3]), std::swap(b[1], b[2]);
            float v;
            std::memcpy(&v, b, 4);
            im.data[size_t(y) * w * channels + i] = double(v);
        }
    }
    return im;
}

ImageD read_pnm(const std::string& path) {
    auto f = open_in(path);
    std::string magic = pnm_token(f);
    int channels;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else
        throw io_error("not a binary pgm/ppm file: " + path);
    int w = parse_int(pnm_token(f), "pnm width");
    int h = parse_int(pnm_token(f), "pnm height");
    int maxval = parse_int(pnm_token(f), "pnm maxval");
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw io_error("unsupported pnm header (need 8-bit): " + path);
    std::vector<unsigned char> raw(size_t(w) * h * channels);
    f.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
    if (!f)
        throw io_error("truncated pnm data: " + path);
    ImageD im(w, h, channels);
    for (size_t i = 0; i < raw.size(); ++i)
        im.data[i] = double(raw[i]) / double(maxval);
    return im;
}

void write_pnm(const ImageD& im, const std::string& path) {
    if (im.channels != 1 && im.channels != 3)
        throw io_error("pnm supports 1 or 3 channels");
    auto f = open_out(path);
    f << (im.channels == 3 ? "P6" : "P5") << "\n"
      << im.width << " " << im.height << "\n255\n";
    std::vector<unsigned char> raw(im.data.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        double v = std::clamp(im.data[i], 0.0, 1.0);
        raw[i] = (unsigned char)std::lround(v * 255.0);
    }
    f.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
    finish_out(f, path);
}

void write_depth_png16(const ImageD& depth_mm, const MaskImage& valid,
                       const std::string& path) {
    if (depth_mm.channels != 1)
        throw io_error("png16 expects a single-channel depth map");
    if (!depth_mm.same_shape(valid))
        throw io_error("png16: mask shape differs from depth");
    const int w = depth_mm.width, h = depth_mm.height;

    // Scanlines: filter byte 0, then big-endian u16 samples.
    std::string raw;
    raw.reserve(size_t(h) * (1 + size_t(w) * 2));
    for (int y = 0; y < h; ++y) {
        raw.push_back('\0');
        for (int x = 0; x < w; ++x) {
            uint16_t q = 0;
            if (valid(y, x))
                q = uint16_t(std::clamp(std::round(depth_mm(y, x)), 0.0, 65535.0));
            raw.push_back(char((q >> 8) & 0xff));
            raw.push_back(char(q & 0xff));
        }
    }
    uLongf comp_len = compressBound(uLong(raw.size()));
    std::string comp(comp_len, '\0');
    if (compress2(reinterpret_cast<Bytef*>(comp.data()), &comp_len,
                  reinterpret_cast<const Bytef*>(raw.data()), uLong(raw.size()),
                  Z_DEFAULT_COMPRESSION) != Z_OK)
        throw io_error("png16: deflate failed");
    comp.resize(comp_len);

    auto f = open_out(path);
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    f.write(reinterpret_cast<const char*>(sig), 8);
    std::string ihdr;
    put_u32_be(ihdr, uint32_t(w));
    put_u32_be(ihdr, uint32_t(h));
    ihdr.push_back(16); // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // adaptive filtering (rows use filter 0)
    ihdr.push_back(0);  // no interlace
    write_png_chunk(f, "IHDR", ihdr);
    write_png_chunk(f, "IDAT", comp);
    write_png_chunk(f, "IEND", "");
    finish_out(f, path);
}

CsvWriter::Cell::Cell(double v) : text(format_double(v)) {}
CsvWriter::Cell::Cell(int v) : text(std::to_string(v)) {}
CsvWriter::Cell::Cell(long v) : text(std::to_string(v)) {}

CsvWriter::CsvWriter(const std::string& path) : path_(path) {
    auto* f = new std::ofstream(path, std::ios::binary);
    if (!*f) {
        delete f;
        throw io_error("cannot open for writing: " + path);
    }
    stream_ = f;
}

CsvWriter::~CsvWriter() {
    auto* f = static_cast<std::ofstream*>(stream_);
    f->flush();
    delete f;
}

void CsvWriter::row(const std::vector<Cell>& cells) {
    auto* f = static_cast<std::ofstream*>(stream_);
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i)
            f->put(',');
        f->write(cells[i].text.data(), std::streamsize(cells[i].text.size()));
    }
    f->put('\n');
    if (!*f)
        throw io_error("write failed: " + path_);
}

} // namespace slsim
