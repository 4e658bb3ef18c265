#pragma once

#include <string>
#include <vector>

#include "slsim/image.hpp"

namespace slsim {

// Portable float map, 1 or 3 channels, little-endian (scale -1). Values are
// stored losslessly as float32; rows are bottom-up per the format.
void write_pfm(const ImageD& im, const std::string& path);
ImageD read_pfm(const std::string& path);

// Binary PGM/PPM with maxval 255. Loading normalizes to [0,1]; saving clamps
// to [0,1] and rounds. Used for pattern images.
ImageD read_pnm(const std::string& path);
void write_pnm(const ImageD& im, const std::string& path);

// 16-bit grayscale PNG of a depth map: values are millimetres rounded to the
// nearest integer and clamped to [0, 65535]; invalid pixels write 0.
void write_depth_png16(const ImageD& depth_mm, const MaskImage& valid,
                       const std::string& path);

// Minimal CSV emitter with locale-independent shortest round-trip doubles.
// An empty Cell renders as an empty field.
struct CsvWriter {
    struct Cell {
        std::string text;
        Cell() = default;
        Cell(const char* s) : text(s) {}
        Cell(const std::string& s) : text(s) {}
        Cell(double v);
        Cell(int v);
        Cell(long v);
    };
    explicit CsvWriter(const std::string& path);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;
    void row(const std::vector<Cell>& cells);

  private:
    void* stream_;
    std::string path_;
};

} // namespace slsim
