//! Deterministic collocation, boundary, and initial-condition point sets.
//!
//! Point sets are generated once before training and never resampled.
//! The Sobol generator follows the new-joe-kuo-6 direction numbers
//! (dimension 2 uses the primitive polynomial x^2 + x + 1, a = 1,
//! m = [1, 3]); index 0 of the sequence is the origin, so interior sampling
//! conventionally skips it (`skip = 1`).

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Interior,
    Boundary,
    Initial,
}

/// An axis-aligned box, possibly with a time axis appended.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, CoreError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(CoreError::invalid("box needs matching non-empty bounds"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(CoreError::invalid(format!("degenerate box: lo {lo:?}, hi {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().enumerate().all(|(k, x)| *x >= self.lo[k] && *x <= self.hi[k])
    }

    pub fn strictly_inside(&self, p: &[f64], tol: f64) -> bool {
        p.iter().enumerate().all(|(k, x)| *x > self.lo[k] + tol && *x < self.hi[k] - tol)
    }
}

/// A fixed batch of sample points with a role and optional per-point face tags.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub role: Role,
    pub coords: Tensor,
    pub tags: Option<Vec<usize>>,
}

impl PointSet {
    pub fn new(role: Role, coords: Tensor) -> Self {
        Self { role, coords, tags: None }
    }

    pub fn len(&self) -> usize {
        self.coords.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.coords.shape()[1]
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords.data()[i * d..(i + 1) * d]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.data().chunks_exact(self.dim())
    }

    /// CSV dump with header `x[,y][,t],role,tag`.
    pub fn to_csv(&self, axis_names: &[&str]) -> String {
        let mut out = String::new();
        out.push_str(&axis_names.join(","));
        out.push_str(",role,tag\n");
        let role = match self.role {
            Role::Interior => "interior",
            Role::Boundary => "boundary",
            Role::Initial => "initial",
        };
        for (i, p) in self.iter_points().enumerate() {
            for x in p {
                out.push_str(&format!("{x:.17e},"));
            }
            let tag =
                self.tags.as_ref().map(|t| t[i].to_string()).unwrap_or_else(|| "-".to_string());
            out.push_str(&format!("{role},{tag}\n"));
        }
        out
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Evenly spaced points including both endpoints; dim 2 is the row-major
/// flattened tensor-product grid with `n` points per axis.
pub fn uniform_grid(domain: &BoxDomain, n: usize, dim: usize) -> Result<PointSet, CoreError> {
    if n < 2 {
        return Err(CoreError::invalid("uniform grid needs n >= 2 per axis"));
    }
    if dim != domain.dim() || !(1..=2).contains(&dim) {
        return Err(CoreError::invalid(format!(
            "uniform grid supports dim 1 or 2 matching the domain, got {dim}"
        )));
    }
    let coords = match dim {
        1 => Tensor::column(&linspace(domain.lo[0], domain.hi[0], n)),
        _ => {
            let xs = linspace(domain.lo[0], domain.hi[0], n);
            let ys = linspace(domain.lo[1], domain.hi[1], n);
            let mut data = Vec::with_capacity(2 * n * n);
            for x in &xs {
                for y in &ys {
                    data.push(*x);
                    data.push(*y);
                }
            }
            Tensor::new(vec![n * n, 2], data)?
        }
    };
    Ok(PointSet::new(Role::Interior, coords))
}

/// Per-axis placement rule for grids that must avoid the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisMode {
    /// Both endpoints included.
    Closed,
    /// Both endpoints excluded: x_i = lo + (hi-lo)(i+1)/(n+1).
    Open,
    /// Low endpoint excluded, high included: x_i = lo + (hi-lo)(i+1)/n.
    HalfOpenLow,
}

pub fn axis_points(lo: f64, hi: f64, n: usize, mode: AxisMode) -> Vec<f64> {
    match mode {
        AxisMode::Closed => linspace(lo, hi, n),
        AxisMode::Open => (0..n).map(|i| lo + (hi - lo) * (i + 1) as f64 / (n + 1) as f64).collect(),
        AxisMode::HalfOpenLow => {
            (0..n).map(|i| lo + (hi - lo) * (i + 1) as f64 / n as f64).collect()
        }
    }
}

/// Tensor-product grid with explicit per-axis counts and placement modes.
pub fn product_grid(
    domain: &BoxDomain,
    counts: &[usize],
    modes: &[AxisMode],
    role: Role,
) -> Result<PointSet, CoreError> {
    let dim = domain.dim();
    if counts.len() != dim || modes.len() != dim {
        return Err(CoreError::invalid("per-axis counts/modes must match the domain dimension"));
    }
    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|k| axis_points(domain.lo[k], domain.hi[k], counts[k], modes[k]))
        .collect();
    let total: usize = counts.iter().product();
    let mut data = Vec::with_capacity(total * dim);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        for k in 0..dim {
            data.push(axes[k][idx[k]]);
        }
        // row-major advance over the last axis fastest
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(PointSet::new(role, Tensor::new(vec![total, dim], data)?))
}

/// Split a requested point count into per-axis counts whose product is close
/// to `n`: the factor pair of `n` with the smallest spread, larger count on
/// the axis with the larger extent.
pub fn balanced_axes(domain: &BoxDomain, n: usize) -> Vec<usize> {
    let dim = domain.dim();
    if dim == 1 {
        return vec![n];
    }
    let mut best = (1, n);
    let mut best_spread = usize::MAX;
    let mut f = 1;
    while f * f <= n {
        if n % f == 0 {
            let spread = n / f - f;
            if spread < best_spread {
                best_spread = spread;
                best = (f, n / f);
            }
        }
        f += 1;
    }
    let (small, large) = best;
    let extent0 = domain.hi[0] - domain.lo[0];
    let extent1 = domain.hi[1] - domain.lo[1];
    if extent0 >= extent1 {
        vec![large, small]
    } else {
        vec![small, large]
    }
}

// ---- Sobol ----

const SOBOL_BITS: usize = 31;

/// Direction vectors for one Sobol dimension.
fn sobol_directions(dim: usize) -> [u32; SOBOL_BITS] {
    // new-joe-kuo-6 table: the first dimension is the van der Corput
    // sequence in base 2; the second has polynomial degree s = 1, a = 0,
    // m = [1] (verified against scipy.stats.qmc.Sobol, scramble=False).
    let mut v = [0u32; SOBOL_BITS];
    match dim {
        0 => {
            for (i, slot) in v.iter_mut().enumerate() {
                *slot = 1 << (SOBOL_BITS - 1 - i);
            }
        }
        1 => {
            v[0] = 1 << (SOBOL_BITS - 1);
            for i in 1..SOBOL_BITS {
                v[i] = v[i - 1] ^ (v[i - 1] >> 1);
            }
        }
        _ => panic!("sobol implemented for dims 1..=2"),
    }
    v
}

/// First `n` Sobol points (after skipping `skip`) mapped affinely into the
/// box. Index 0 of the raw sequence is the origin.
pub fn sobol_points(
    domain: &BoxDomain,
    n: usize,
    dim: usize,
    skip: usize,
) -> Result<PointSet, CoreError> {
    if dim != domain.dim() || !(1..=2).contains(&dim) {
        return Err(CoreError::invalid("sobol supports dim 1 or 2 matching the domain"));
    }
    let dirs: Vec<[u32; SOBOL_BITS]> = (0..dim).map(sobol_directions).collect();
    let mut state = vec![0u32; dim];
    let mut data = Vec::with_capacity(n * dim);
    let denom = (1u64 << SOBOL_BITS) as f64;
    for i in 0..skip + n {
        if i >= skip {
            for k in 0..dim {
                let u = state[k] as f64 / denom;
                data.push(domain.lo[k] + (domain.hi[k] - domain.lo[k]) * u);
            }
        }
        // Gray-code update: flip the direction of the lowest zero bit of i.
        let c = (i as u64).trailing_ones() as usize;
        for k in 0..dim {
            state[k] ^= dirs[k][c];
        }
    }
    Ok(PointSet::new(Role::Interior, Tensor::new(vec![n, dim], data)?))
}

// ---- boundary faces ----

/// One face of a box domain: a fixed value on one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub axis: usize,
    /// false = low side, true = high side.
    pub high: bool,
    pub name: &'static str,
}

/// Uniform points on each face of a 1-D or 2-D box. Faces are ordered
/// lexicographically by (axis, side); a corner belongs to the first face
/// containing it, and later faces place their points strictly inside their
/// edge so no coordinate is emitted twice.
pub fn boundary_points(
    domain: &BoxDomain,
    faces: &[Face],
    n_per_face: usize,
) -> Result<PointSet, CoreError> {
    let dim = domain.dim();
    let mut data = Vec::new();
    let mut tags = Vec::new();
    if dim == 1 {
        for (tag, face) in faces.iter().enumerate() {
            let x = if face.high { domain.hi[0] } else { domain.lo[0] };
            data.push(x);
            tags.push(tag);
        }
        let coords = Tensor::new(vec![faces.len(), 1], data)?;
        let mut ps = PointSet::new(Role::Boundary, coords);
        ps.tags = Some(tags);
        return Ok(ps);
    }
    for (tag, face) in faces.iter().enumerate() {
        let fixed = if face.high { domain.hi[face.axis] } else { domain.lo[face.axis] };
        let other = 1 - face.axis;
        // Corners are owned by the lexicographically first face, i.e. faces
        // on axis 0 keep their endpoints; faces on axis 1 stay open.
        let owns_corners = faces
            .iter()
            .take_while(|f| *f != face)
            .all(|f| f.axis == face.axis);
        let mode = if owns_corners { AxisMode::Closed } else { AxisMode::Open };
        let along = axis_points(domain.lo[other], domain.hi[other], n_per_face, mode);
        for t in along {
            let mut p = [0.0; 2];
            p[face.axis] = fixed;
            p[other] = t;
            data.extend_from_slice(&p);
            tags.push(tag);
        }
    }
    let n = tags.len();
    let coords = Tensor::new(vec![n, dim], data)?;
    let mut ps = PointSet::new(Role::Boundary, coords);
    ps.tags = Some(tags);
    Ok(ps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> BoxDomain {
        BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    fn square_faces() -> Vec<Face> {
        vec![
            Face { axis: 0, high: false, name: "x_lo" },
            Face { axis: 0, high: true, name: "x_hi" },
            Face { axis: 1, high: false, name: "y_lo" },
            Face { axis: 1, high: true, name: "y_hi" },
        ]
    }

    #[test]
    fn grid_1d_includes_endpoints() {
        let d = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
        let ps = uniform_grid(&d, 3, 1).unwrap();
        assert_eq!(ps.coords.data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn grid_2x2_is_the_four_corners() {
        let ps = uniform_grid(&unit_square(), 2, 2).unwrap();
        let pts: Vec<_> = ps.iter_points().map(|p| (p[0], p[1])).collect();
        assert_eq!(pts, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn grid_spacing_exact() {
        let d = BoxDomain::new(vec![-1.0], vec![1.0]).unwrap();
        let ps = uniform_grid(&d, 5, 1).unwrap();
        for w in ps.coords.data().windows(2) {
            assert_eq!(w[1] - w[0], 0.5);
        }
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(BoxDomain::new(vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn sobol_reference_prefix() {
        // Known head of the new-joe-kuo-6 sequence in 2-D, origin first.
        let d = unit_square();
        let ps = sobol_points(&d, 8, 2, 0).unwrap();
        let expect = [
            (0.0, 0.0),
            (0.5, 0.5),
            (0.75, 0.25),
            (0.25, 0.75),
            (0.375, 0.375),
            (0.875, 0.875),
            (0.625, 0.125),
            (0.125, 0.625),
        ];
        for (p, e) in ps.iter_points().zip(expect) {
            assert_eq!((p[0], p[1]), e);
        }
    }

    #[test]
    fn sobol_skip_offsets_the_sequence() {
        let d = unit_square();
        let a = sobol_points(&d, 4, 2, 3).unwrap();
        let b = sobol_points(&d, 7, 2, 0).unwrap();
        for (i, p) in a.iter_points().enumerate() {
            assert_eq!(p, b.point(i + 3));
        }
    }

    #[test]
    fn sobol_points_stay_in_box() {
        let d = BoxDomain::new(vec![-1.0, 2.0], vec![1.0, 5.0]).unwrap();
        let ps = sobol_points(&d, 256, 2, 1).unwrap();
        assert!(ps.iter_points().all(|p| d.contains(p)));
    }

    /// Crude star-discrepancy estimator: sup over anchor boxes with corners
    /// at sample coordinates of |count/N - area|.
    fn star_discrepancy(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let mut ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        xs.push(1.0);
        ys.push(1.0);
        let mut worst: f64 = 0.0;
        for &x in &xs {
            for &y in &ys {
                let inside =
                    points.iter().filter(|p| p.0 < x && p.1 < y).count() as f64;
                let closed =
                    points.iter().filter(|p| p.0 <= x && p.1 <= y).count() as f64;
                worst = worst.max((inside / n - x * y).abs());
                worst = worst.max((closed / n - x * y).abs());
            }
        }
        worst
    }

    #[test]
    fn sobol_beats_pseudorandom_discrepancy() {
        use rand::Rng;
        use rand::SeedableRng;
        let d = unit_square();
        let ps = sobol_points(&d, 256, 2, 0).unwrap();
        let sobol: Vec<_> = ps.iter_points().map(|p| (p[0], p[1])).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let random: Vec<(f64, f64)> = (0..256).map(|_| (rng.random(), rng.random())).collect();
        assert!(star_discrepancy(&sobol) < star_discrepancy(&random));
    }

    #[test]
    fn square_boundary_counts_and_tags() {
        let ps = boundary_points(&unit_square(), &square_faces(), 3).unwrap();
        assert_eq!(ps.len(), 12);
        let tags = ps.tags.as_ref().unwrap();
        let mut seen = std::collections::BTreeSet::new();
        seen.extend(tags.iter().copied());
        assert_eq!(seen.len(), 4);
        // every point satisfies its face's defining equation exactly
        let faces = square_faces();
        for (i, p) in ps.iter_points().enumerate() {
            let f = &faces[tags[i]];
            let fixed = if f.high { 1.0 } else { 0.0 };
            assert!((p[f.axis] - fixed).abs() <= 1e-15);
        }
        // corners owned by exactly one face
        let mut coords: Vec<(u64, u64)> =
            ps.iter_points().map(|p| (p[0].to_bits(), p[1].to_bits())).collect();
        coords.sort_unstable();
        coords.dedup();
        assert_eq!(coords.len(), 12);
    }

    #[test]
    fn interval_boundary_is_two_endpoints() {
        let d = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
        let faces = vec![
            Face { axis: 0, high: false, name: "left" },
            Face { axis: 0, high: true, name: "right" },
        ];
        for n in [1, 5, 100] {
            let ps = boundary_points(&d, &faces, n).unwrap();
            assert_eq!(ps.len(), 2);
            assert_eq!(ps.coords.data(), &[0.0, 1.0]);
        }
    }

    #[test]
    fn product_grid_modes() {
        let d = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let ps =
            product_grid(&d, &[3, 4], &[AxisMode::Open, AxisMode::HalfOpenLow], Role::Interior)
                .unwrap();
        assert_eq!(ps.len(), 12);
        assert!(ps.iter_points().all(|p| p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] <= 2.0));
        assert_eq!(ps.point(0), &[0.25, 0.5]);
    }

    #[test]
    fn balanced_axes_prefers_long_axis() {
        let d = BoxDomain::new(vec![0.0, 0.0], vec![6.28, 1.0]).unwrap();
        assert_eq!(balanced_axes(&d, 2048), vec![64, 32]);
        let sq = unit_square();
        assert_eq!(balanced_axes(&sq, 2500), vec![50, 50]);
    }

    #[test]
    fn reproducibility_byte_for_byte() {
        let d = unit_square();
        let a = sobol_points(&d, 100, 2, 1).unwrap();
        let b = sobol_points(&d, 100, 2, 1).unwrap();
        assert_eq!(a.coords, b.coords);
    }
}
