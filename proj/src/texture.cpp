#include "photocal/texture.hpp"

#include <cmath>
#include <string>

namespace photocal {

std::string_view to_string(TextureKind kind) {
  switch (kind) {
    case TextureKind::checkerboard:
      return "checkerboard";
  }
  return "unknown";
}

TextureKind texture_kind_from_string(std::string_view name) {
  if (name == "checkerboard") return TextureKind::checkerboard;
  throw ConfigError("unknown texture kind '" + std::string(name) + "'");
}

void validate(const BoardSpec& spec) {
  if (spec.rows < 2 || spec.cols < 2) throw ConfigError("board: rows and cols must be >= 2");
  if (!(spec.spacing > 0.0) || !std::isfinite(spec.spacing)) throw ConfigError("board: spacing must be positive");
  if (!(spec.margin >= 0.0) || !std::isfinite(spec.margin)) throw ConfigError("board: margin must be >= 0");
}

double texture(const BoardSpec& spec, double u, double v) {
  return texture_blurred(spec, u, v, 0.0, 0.0);
}

std::array<double, 2> projection_stretch(const CameraIntrinsics& intr, const BoardPose& pose,
                                         double u, double v) {
  return projection_stretch(intr, rotation_from_quaternion(pose.q), pose.t, u, v);
}

}  // namespace photocal
