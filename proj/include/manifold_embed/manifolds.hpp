#pragma once

#include <cmath>
#include <string>

#include "manifold_embed/errors.hpp"
#include "manifold_embed/matrix.hpp"

namespace manifold_embed {

// Head outputs and manifold points are 1 x k / 1 x ambient Matrix rows.

enum class ManifoldFamily {
    Sphere,          // unit hypersphere S^(d-1), projection = L2 normalization
    TorusFlat,       // product of two unit circles in R^4
    TorusEmbedded,   // donut surface in R^3 with radii R > r > 0
    MobiusFlat,      // twisted-coordinate map [cos(f1) f2, sin(f1) f2, f3]
    MobiusEmbedded,  // half-twist strip in R^3, radial coordinate smoothly clamped
    Euclidean,       // identity map; carries the unconstrained baseline
};

// Half-width of the embedded Mobius strip. The raw parametrization only stays
// a strip for bounded radial input, so f2 is squashed through w * tanh before
// the map; the squash is smooth and differentiated through.
inline constexpr double kMobiusWidth = 1.0;

class ManifoldKind {
public:
    static ManifoldKind sphere(std::size_t dim = 3) {
        if (dim < 2) throw ConfigError("sphere: dimension must be >= 2");
        return ManifoldKind(ManifoldFamily::Sphere, dim, 0.0, 0.0);
    }
    static ManifoldKind torus_flat() {
        return ManifoldKind(ManifoldFamily::TorusFlat, 0, 0.0, 0.0);
    }
    static ManifoldKind torus_embedded(double major_radius = 2.0, double minor_radius = 1.0) {
        if (!(minor_radius > 0.0) || !(major_radius > minor_radius))
            throw ConfigError("torus_embedded: requires R > r > 0, got R=" +
                              std::to_string(major_radius) + " r=" +
                              std::to_string(minor_radius));
        return ManifoldKind(ManifoldFamily::TorusEmbedded, 0, major_radius, minor_radius);
    }
    static ManifoldKind mobius_flat() {
        return ManifoldKind(ManifoldFamily::MobiusFlat, 0, 0.0, 0.0);
    }
    static ManifoldKind mobius_embedded() {
        return ManifoldKind(ManifoldFamily::MobiusEmbedded, 0, 0.0, 0.0);
    }
    static ManifoldKind euclidean(std::size_t dim = 3) {
        if (dim < 1) throw ConfigError("euclidean: dimension must be >= 1");
        return ManifoldKind(ManifoldFamily::Euclidean, dim, 0.0, 0.0);
    }

    ManifoldFamily family() const { return family_; }
    double major_radius() const { return major_radius_; }
    double minor_radius() const { return minor_radius_; }

    // Required head-output arity k.
    std::size_t head_dim() const {
        switch (family_) {
            case ManifoldFamily::Sphere: return dim_;
            case ManifoldFamily::TorusFlat: return 2;
            case ManifoldFamily::TorusEmbedded: return 2;
            case ManifoldFamily::MobiusFlat: return 3;
            case ManifoldFamily::MobiusEmbedded: return 2;
            case ManifoldFamily::Euclidean: return dim_;
        }
        return 0;
    }

    std::size_t ambient_dim() const {
        switch (family_) {
            case ManifoldFamily::Sphere: return dim_;
            case ManifoldFamily::TorusFlat: return 4;
            case ManifoldFamily::TorusEmbedded: return 3;
            case ManifoldFamily::MobiusFlat: return 3;
            case ManifoldFamily::MobiusEmbedded: return 3;
            case ManifoldFamily::Euclidean: return dim_;
        }
        return 0;
    }

    std::string name() const {
        switch (family_) {
            case ManifoldFamily::Sphere: return "sphere";
            case ManifoldFamily::TorusFlat: return "torus_flat";
            case ManifoldFamily::TorusEmbedded: return "torus_embedded";
            case ManifoldFamily::MobiusFlat: return "mobius_flat";
            case ManifoldFamily::MobiusEmbedded: return "mobius_embedded";
            case ManifoldFamily::Euclidean: return "euclidean";
        }
        return "?";
    }

    bool operator==(const ManifoldKind& o) const {
        return family_ == o.family_ && dim_ == o.dim_ &&
               major_radius_ == o.major_radius_ && minor_radius_ == o.minor_radius_;
    }

private:
    ManifoldKind(ManifoldFamily family, std::size_t dim, double R, double r)
        : family_(family), dim_(dim), major_radius_(R), minor_radius_(r) {}

    ManifoldFamily family_;
    std::size_t dim_;
    double major_radius_;
    double minor_radius_;
};

inline Matrix project_sphere(const Matrix& v) { return l2_normalize_row(v); }

inline Matrix project_torus_flat(double f1, double f2) {
    return Matrix{{std::cos(f1), std::sin(f1), std::cos(f2), std::sin(f2)}};
}

inline Matrix project_torus_embedded(double f1, double f2, double major_radius,
                                     double minor_radius) {
    if (!(minor_radius > 0.0) || !(major_radius > minor_radius))
        throw ConfigError("project_torus_embedded: requires R > r > 0");
    const double ring = major_radius + minor_radius * std::cos(f2);
    return Matrix{{ring * std::cos(f1), ring * std::sin(f1), minor_radius * std::sin(f2)}};
}

inline Matrix project_mobius_flat(double f1, double f2, double f3) {
    return Matrix{{std::cos(f1) * f2, std::sin(f1) * f2, f3}};
}

inline Matrix project_mobius_embedded(double f1, double f2) {
    const double th = 0.5 * kMobiusWidth * std::tanh(f2);  // clamped radial half-offset
    const double c = std::cos(0.5 * f1), s = std::sin(0.5 * f1);
    const double ring = 1.0 + th * c;
    return Matrix{{ring * std::cos(f1), ring * std::sin(f1), th * s}};
}

namespace detail {
inline void check_arity(const ManifoldKind& kind, const Matrix& v, std::size_t expected,
                        const char* what) {
    if (v.rows() != 1 || v.cols() != expected)
        throw ConfigError(std::string(what) + ": " + kind.name() + " expects a 1x" +
                          std::to_string(expected) + " row, got " + v.shape_str());
}
}  // namespace detail

// Dispatch over the manifold menu. `v` must be a 1 x head_dim row.
inline Matrix project(const ManifoldKind& kind, const Matrix& v) {
    detail::check_arity(kind, v, kind.head_dim(), "project");
    switch (kind.family()) {
        case ManifoldFamily::Sphere: return project_sphere(v);
        case ManifoldFamily::TorusFlat: return project_torus_flat(v[0], v[1]);
        case ManifoldFamily::TorusEmbedded:
            return project_torus_embedded(v[0], v[1], kind.major_radius(),
                                          kind.minor_radius());
        case ManifoldFamily::MobiusFlat: return project_mobius_flat(v[0], v[1], v[2]);
        case ManifoldFamily::MobiusEmbedded: return project_mobius_embedded(v[0], v[1]);
        case ManifoldFamily::Euclidean: return v;
    }
    throw ConfigError("project: unknown manifold");
}

// J^T * upstream for the projection at v, hand-derived per map and validated
// against finite differences in the test suite.
inline Matrix project_backward(const ManifoldKind& kind, const Matrix& v,
                               const Matrix& upstream) {
    detail::check_arity(kind, v, kind.head_dim(), "project_backward");
    detail::check_arity(kind, upstream, kind.ambient_dim(), "project_backward(upstream)");
    switch (kind.family()) {
        case ManifoldFamily::Sphere: {
            const double norm = l2_norm(v);
            if (!(norm > kNormEpsilon))
                throw NumericError("project_backward: degenerate sphere input norm");
            double dot = 0.0;
            for (std::size_t j = 0; j < v.cols(); ++j) dot += v[j] * upstream[j];
            dot /= norm * norm;
            Matrix grad(1, v.cols());
            for (std::size_t j = 0; j < v.cols(); ++j)
                grad[j] = (upstream[j] - v[j] * dot) / norm;
            return grad;
        }
        case ManifoldFamily::TorusFlat: {
            const double s1 = std::sin(v[0]), c1 = std::cos(v[0]);
            const double s2 = std::sin(v[1]), c2 = std::cos(v[1]);
            return Matrix{{-s1 * upstream[0] + c1 * upstream[1],
                           -s2 * upstream[2] + c2 * upstream[3]}};
        }
        case ManifoldFamily::TorusEmbedded: {
            const double R = kind.major_radius(), r = kind.minor_radius();
            const double s1 = std::sin(v[0]), c1 = std::cos(v[0]);
            const double s2 = std::sin(v[1]), c2 = std::cos(v[1]);
            const double ring = R + r * c2;
            const double g1 = -ring * s1 * upstream[0] + ring * c1 * upstream[1];
            const double g2 = -r * s2 * c1 * upstream[0] - r * s2 * s1 * upstream[1] +
                              r * c2 * upstream[2];
            return Matrix{{g1, g2}};
        }
        case ManifoldFamily::MobiusFlat: {
            const double s1 = std::sin(v[0]), c1 = std::cos(v[0]);
            return Matrix{{(-s1 * upstream[0] + c1 * upstream[1]) * v[1],
                           c1 * upstream[0] + s1 * upstream[1], upstream[2]}};
        }
        case ManifoldFamily::MobiusEmbedded: {
            const double tanh_f2 = std::tanh(v[1]);
            const double th = 0.5 * kMobiusWidth * tanh_f2;
            const double dth = 0.5 * kMobiusWidth * (1.0 - tanh_f2 * tanh_f2);
            const double c = std::cos(0.5 * v[0]), s = std::sin(0.5 * v[0]);
            const double C = std::cos(v[0]), S = std::sin(v[0]);
            const double ring = 1.0 + th * c;
            const double dring_df1 = -0.5 * th * s;
            const double g1 = (dring_df1 * C - ring * S) * upstream[0] +
                              (dring_df1 * S + ring * C) * upstream[1] +
                              0.5 * th * c * upstream[2];
            const double g2 =
                (c * C * upstream[0] + c * S * upstream[1] + s * upstream[2]) * dth;
            return Matrix{{g1, g2}};
        }
        case ManifoldFamily::Euclidean: return upstream;
    }
    throw ConfigError("project_backward: unknown manifold");
}

// Surface-membership predicate at tolerance `tol`.
inline bool on_manifold(const ManifoldKind& kind, const Matrix& p, double tol) {
    detail::check_arity(kind, p, kind.ambient_dim(), "on_manifold");
    switch (kind.family()) {
        case ManifoldFamily::Sphere:
            return std::abs(l2_norm(p) - 1.0) <= tol;
        case ManifoldFamily::TorusFlat:
            return std::abs(p[0] * p[0] + p[1] * p[1] - 1.0) <= tol &&
                   std::abs(p[2] * p[2] + p[3] * p[3] - 1.0) <= tol;
        case ManifoldFamily::TorusEmbedded: {
            const double R = kind.major_radius(), r = kind.minor_radius();
            const double ring = std::hypot(p[0], p[1]) - R;
            return std::abs(ring * ring + p[2] * p[2] - r * r) <= tol;
        }
        case ManifoldFamily::MobiusFlat: {
            // Preimage always exists: f1 from atan2, f2 the planar radius, f3 = z.
            const double f1 = std::atan2(p[1], p[0]);
            const double f2 = std::hypot(p[0], p[1]);
            const Matrix q = project_mobius_flat(f1, f2, p[2]);
            const double err = std::hypot(std::hypot(q[0] - p[0], q[1] - p[1]), q[2] - p[2]);
            return err <= tol;
        }
        case ManifoldFamily::MobiusEmbedded: {
            // Solve the preimage at the principal angle; the ring coefficient is
            // positive for every on-strip point, so atan2 recovers f1 directly.
            const double f1 = std::atan2(p[1], p[0]);
            const double c = std::cos(0.5 * f1), s = std::sin(0.5 * f1);
            const double planar = std::hypot(p[0], p[1]);
            const double th = (planar - 1.0) * c + p[2] * s;
            if (std::abs(2.0 * th) > kMobiusWidth + tol) return false;
            const double ring = 1.0 + th * c;
            const double ex = ring * std::cos(f1) - p[0];
            const double ey = ring * std::sin(f1) - p[1];
            const double ez = th * s - p[2];
            return std::hypot(std::hypot(ex, ey), ez) <= tol;
        }
        case ManifoldFamily::Euclidean:
            return p.all_finite();
    }
    throw ConfigError("on_manifold: unknown manifold");
}

}  // namespace manifold_embed
