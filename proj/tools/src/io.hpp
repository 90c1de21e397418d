#ifndef CMFKIT_TOOLS_IO_HPP
#define CMFKIT_TOOLS_IO_HPP

#include <cmfkit/grid.hpp>

#include <stdexcept>
#include <string>

namespace cmfkit::tools {

/// File problems (missing, malformed, short) as opposed to bad arguments.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Binary PGM (P5), 8 or 16 bit (16 bit big-endian); intensities are
/// normalized by maxval to [0,1].
ScalarField read_pgm(const std::string& path);
void write_pgm(const ScalarField& img, const std::string& path, int maxval = 255);

/// Raw little-endian volume described by a JSON sidecar header:
/// {"dims":[nx,ny,nz], "dtype":"f32"|"u8", "order":"x-fastest",
///  "data":"payload.raw", "components":m (vector fields only)}.
/// The payload path is resolved relative to the header.
ScalarField read_volume(const std::string& header_path);
void write_volume(const ScalarField& vol, const std::string& header_path,
                  const std::string& dtype = "f32");

VectorField read_deformation(const std::string& header_path);
void write_deformation(const VectorField& u, const std::string& header_path);

/// Extension dispatch: .pgm is a 2D image, .json a volume header.
ScalarField load_image(const std::string& path);
void save_image(const ScalarField& img, const std::string& path);

/// Binary masks: PGM with maxval 1 in 2D, u8 volume in 3D; payload {0,1}.
void save_mask(const ScalarField& mask, const std::string& path);

/// Integer label maps 1..n, stored raw (PGM maxval n in 2D, u8 volume in 3D).
void save_labels(const ScalarField& labels, int n, const std::string& path);

} // namespace cmfkit::tools

#endif
