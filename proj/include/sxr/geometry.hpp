#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>

namespace sxr {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Pose of a planar surface in world coordinates. Basis columns are the
// surface x axis, surface y axis and outward normal z.
struct SurfacePlane {
    Vec3 origin = Vec3::Zero();
    Mat3 basis = Mat3::Identity();

    // world -> surface-local; local z is signed distance along the normal
    Vec3 to_local(const Vec3& world) const { return basis.transpose() * (world - origin); }
    Vec3 to_world(const Vec3& local) const { return origin + basis * local; }
    Vec3 normal() const { return basis.col(2); }
};

inline bool is_orthonormal(const Mat3& m, double tol = 1e-6) {
    return (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol;
}

inline void validate_plane(const SurfacePlane& plane) {
    if (!is_orthonormal(plane.basis))
        throw std::invalid_argument("surface plane basis is not orthonormal");
    if (plane.basis.determinant() < 0.0)
        throw std::invalid_argument("surface plane basis is left-handed");
}

struct HeadPose {
    Vec3 position = Vec3::Zero();
    Quat orientation = Quat::Identity();

    Vec3 to_local(const Vec3& world) const {
        return orientation.conjugate() * (world - position);
    }
    Vec3 to_world(const Vec3& local) const { return position + orientation * local; }
};

// Quaternion turning the +z axis toward `forward` with `up` disambiguating roll.
inline Quat look_rotation(const Vec3& forward, const Vec3& up) {
    Vec3 f = forward.normalized();
    Vec3 r = up.cross(f);
    double n = r.norm();
    if (n < 1e-12) { // forward parallel to up; pick any perpendicular
        r = f.unitOrthogonal();
    } else {
        r /= n;
    }
    Vec3 u = f.cross(r);
    Mat3 m;
    m.col(0) = r;
    m.col(1) = u;
    m.col(2) = f;
    return Quat(m);
}

} // namespace sxr
