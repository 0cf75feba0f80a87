//! Outer approximation of the lazily modelled cones.
//!
//! The p-norm objective is disaggregated into `m` power cones
//! `L_v^{1/p} z^{1-1/p} ≥ l_v`; the ε-fair constraint is the second-order cone
//! `z ≥ ‖l‖₂`. Both are enforced by tangent cuts at surface points.

use thiserror::Error;

use crate::formulation::{ModelSpec, Variant, VarMap};
use crate::lp::{Row, Sense};

/// Values below this are treated as zero when projecting.
pub const DEGENERATE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OaError {
    #[error("point ({big_l}, {z}, {l}) is at the cone apex, no tangent exists")]
    Apex { big_l: f64, z: f64, l: f64 },
    #[error("surface point is degenerate: {0}")]
    Degenerate(&'static str),
}

/// A point `(L, z, l)` tested against `P₃^{1/p, 1-1/p}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerConePoint {
    pub big_l: f64,
    pub z: f64,
    pub l: f64,
    pub p: u32,
}

impl PowerConePoint {
    pub fn new(big_l: f64, z: f64, l: f64, p: u32) -> Self {
        Self { big_l, z, l, p }
    }

    /// `L^{1/p} z^{1-1/p}`.
    pub fn surface(&self) -> f64 {
        let a = 1.0 / f64::from(self.p);
        self.big_l.max(0.0).powf(a) * self.z.max(0.0).powf(1.0 - a)
    }

    /// `l - L^{1/p} z^{1-1/p}`; nonpositive inside the cone.
    pub fn violation(&self) -> f64 {
        self.l - self.surface()
    }
}

/// A `≥` cut `Σ a_j x_j ≥ rhs` over model columns.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearCut {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearCut {
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(c, a)| a * x[c]).sum::<f64>() - self.rhs
    }

    /// The cut scaled so its largest coefficient has magnitude one.
    pub fn normalized(&self) -> LinearCut {
        let s = self.coeffs.iter().map(|c| c.1.abs()).fold(0.0, f64::max);
        if s == 0.0 {
            return self.clone();
        }
        LinearCut {
            coeffs: self.coeffs.iter().map(|&(c, a)| (c, a / s)).collect(),
            rhs: self.rhs / s,
        }
    }

    pub fn row(&self) -> Row {
        let n = self.normalized();
        Row::new(n.coeffs, Sense::Ge, n.rhs)
    }
}

/// Projects a violated point onto the cone surface.
///
/// `(L, z)` are held and `l` is lowered to `L^{1/p} z^{1-1/p}`. When `L` is
/// numerically zero that surface value is zero and gives no usable tangent;
/// `(z, l)` are then held and `L` is raised to `l^p / z^{p-1}` instead.
pub fn project_power(pt: PowerConePoint) -> Result<PowerConePoint, OaError> {
    if pt.z < DEGENERATE_TOL || (pt.big_l < DEGENERATE_TOL && pt.l < DEGENERATE_TOL) {
        return Err(OaError::Apex {
            big_l: pt.big_l,
            z: pt.z,
            l: pt.l,
        });
    }
    if pt.big_l < DEGENERATE_TOL {
        let p = pt.p as i32;
        let big_l = pt.l.powi(p) / pt.z.powi(p - 1);
        return Ok(PowerConePoint { big_l, ..pt });
    }
    Ok(PowerConePoint {
        l: pt.surface(),
        ..pt
    })
}

/// Raw tangent coefficients `(a_L, a_z, a_l)` of the cut
/// `a_L L + a_z z + a_l l ≥ 0` at a surface point, i.e.
/// `(1/p) l⁰ z⁰ L + (1 - 1/p) l⁰ L⁰ z ≥ L⁰ z⁰ l`.
pub fn power_tangent(surface: PowerConePoint) -> Result<[f64; 3], OaError> {
    let PowerConePoint { big_l, z, l, p } = surface;
    if big_l < DEGENERATE_TOL || z < DEGENERATE_TOL || l < DEGENERATE_TOL {
        return Err(OaError::Degenerate("tangent needs L, z, l > 0"));
    }
    let a = 1.0 / f64::from(p);
    Ok([a * l * z, (1.0 - a) * l * big_l, -big_l * z])
}

/// The surface point of cone `v` at which `z = ‖l‖_p` is optimal for fixed
/// `l`: `z⁰ = ‖l‖_p`, `L⁰_v = l_v^p / z⁰^{p-1}`, `l⁰_v = l_v`.
///
/// Tangents there are exact for the fixed length vector, so at a point with
/// `z < ‖l‖_p` at least one of them is violated.
pub fn norm_point(lengths: &[f64], v: usize, p: u32) -> Option<PowerConePoint> {
    let z = crate::metrics::p_norm(lengths, p);
    let l = lengths[v];
    if z < DEGENERATE_TOL || l < DEGENERATE_TOL {
        return None;
    }
    let big_l = l * (l / z).powi(p as i32 - 1);
    Some(PowerConePoint { big_l, z, l, p })
}

/// The tangent cut at a surface point over columns `(L, z, l)`.
pub fn power_cut(surface: PowerConePoint, cols: [usize; 3]) -> Result<LinearCut, OaError> {
    let t = power_tangent(surface)?;
    Ok(LinearCut {
        coeffs: vec![(cols[0], t[0]), (cols[1], t[1]), (cols[2], t[2])],
        rhs: 0.0,
    })
}

/// Tangent weights `l⁰ / ‖l⁰‖₂` of `z ≥ ‖l‖₂` at `l⁰`, or `None` near zero.
pub fn soc_weights(lengths: &[f64]) -> Option<Vec<f64>> {
    let norm = lengths.iter().map(|v| v * v).sum::<f64>().sqrt();
    (norm > DEGENERATE_TOL).then(|| lengths.iter().map(|v| v / norm).collect())
}

/// The cut `z ≥ Σ_v (l⁰_v / ‖l⁰‖₂) l_v`, or `None` near zero.
pub fn soc_cut(lengths: &[f64], l_cols: &[usize], z_col: usize) -> Option<LinearCut> {
    let w = soc_weights(lengths)?;
    let mut coeffs = vec![(z_col, 1.0)];
    coeffs.extend(l_cols.iter().zip(&w).filter(|(_, &a)| a != 0.0).map(|(&c, &a)| (c, -a)));
    Some(LinearCut { coeffs, rhs: 0.0 })
}

/// Largest cone violation at `x`; zero for variants without cones.
pub fn violation(spec: &ModelSpec, vm: &VarMap, x: &[f64]) -> f64 {
    let Some(z) = vm.z else { return 0.0 };
    match spec.variant {
        Variant::PNorm(p) => vm
            .l
            .iter()
            .zip(&vm.big_l)
            .map(|(&l, &bl)| PowerConePoint::new(x[bl], x[z], x[l], p).violation())
            .fold(0.0, f64::max),
        Variant::EpsFair(_) => {
            let norm = vm.l.iter().map(|&c| x[c] * x[c]).sum::<f64>().sqrt();
            (norm - x[z]).max(0.0)
        }
        _ => 0.0,
    }
}

/// A cut emitted by [`separate`], kept in cone coordinates for auditing.
#[derive(Clone, Debug, PartialEq)]
pub enum ConeCut {
    /// `a[0] L_v + a[1] z + a[2] l_v ≥ 0`.
    Power { salesman: usize, a: [f64; 3] },
    /// `z ≥ Σ_v w_v l_v`.
    Soc { w: Vec<f64> },
}

impl ConeCut {
    pub fn row(&self, vm: &VarMap) -> Row {
        let z = vm.z.expect("cone variants have z");
        let cut = match self {
            ConeCut::Power { salesman, a } => LinearCut {
                coeffs: vec![(vm.big_l[*salesman], a[0]), (z, a[1]), (vm.l[*salesman], a[2])],
                rhs: 0.0,
            },
            ConeCut::Soc { w } => {
                let mut coeffs = vec![(z, 1.0)];
                coeffs.extend(vm.l.iter().zip(w).filter(|(_, &a)| a != 0.0).map(|(&c, &a)| (c, -a)));
                LinearCut { coeffs, rhs: 0.0 }
            }
        };
        cut.row()
    }
}

/// Tangent cuts for every cone violated by more than `min_violation`, most
/// violated first, at most `limit`.
pub fn separate(spec: &ModelSpec, vm: &VarMap, x: &[f64], min_violation: f64, limit: usize) -> Vec<ConeCut> {
    let Some(z) = vm.z else { return Vec::new() };
    match spec.variant {
        Variant::PNorm(p) => {
            let lengths: Vec<f64> = vm.l.iter().map(|&c| x[c].max(0.0)).collect();
            let mut found: Vec<(f64, usize, [f64; 3])> = Vec::new();
            for v in 0..vm.m {
                let pt = PowerConePoint::new(x[vm.big_l[v]], x[z], x[vm.l[v]], p);
                let viol = pt.violation();
                if viol <= min_violation {
                    continue;
                }
                let separates = |a: &[f64; 3]| {
                    let scale = a.iter().map(|c| c.abs()).fold(0.0, f64::max);
                    a[0] * pt.big_l + a[1] * pt.z + a[2] * pt.l < -1e-9 * scale
                };
                let at_norm = norm_point(&lengths, v, p)
                    .and_then(|s| power_tangent(s).ok())
                    .filter(|a| separates(a));
                let tangent = at_norm.or_else(|| project_power(pt).ok().and_then(|s| power_tangent(s).ok()));
                if let Some(a) = tangent {
                    found.push((viol, v, a));
                }
            }
            found.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            found
                .into_iter()
                .take(limit)
                .map(|(_, salesman, a)| ConeCut::Power { salesman, a })
                .collect()
        }
        Variant::EpsFair(_) => {
            let l: Vec<f64> = vm.l.iter().map(|&c| x[c]).collect();
            let norm = l.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm - x[z] <= min_violation || limit == 0 {
                return Vec::new();
            }
            soc_weights(&l).map(|w| ConeCut::Soc { w }).into_iter().collect()
        }
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{LpModel, LpStatus};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn projection_examples() {
        let s = project_power(PowerConePoint::new(1.0, 1.0, 2.0, 2)).unwrap();
        assert!(close(s.l, 1.0) && s.big_l == 1.0 && s.z == 1.0);
        let s = project_power(PowerConePoint::new(4.0, 1.0, 3.0, 2)).unwrap();
        assert!(close(s.l, 2.0));
        let s = project_power(PowerConePoint::new(1.0, 8.0, 9.0, 3)).unwrap();
        assert!((s.l - 4.0).abs() < 1e-12);
        assert!(project_power(PowerConePoint::new(0.0, 0.0, 1.0, 2)).is_err());
    }

    #[test]
    fn projection_raises_l_at_zero() {
        let pt = PowerConePoint::new(0.0, 2.0, 1.0, 3);
        let s = project_power(pt).unwrap();
        assert!(close(s.big_l, 0.25));
        assert!(s.violation().abs() < 1e-12);
        let a = power_tangent(s).unwrap();
        assert!(a[0] * pt.big_l + a[1] * pt.z + a[2] * pt.l < 0.0);
    }

    #[test]
    fn power_cut_examples() {
        let c = power_cut(PowerConePoint::new(1.0, 1.0, 1.0, 2), [0, 1, 2]).unwrap();
        assert_eq!(c.coeffs, vec![(0, 0.5), (1, 0.5), (2, -1.0)]);
        let c = power_cut(PowerConePoint::new(4.0, 1.0, 2.0, 2), [0, 1, 2]).unwrap();
        assert_eq!(c.coeffs, vec![(0, 1.0), (1, 4.0), (2, -4.0)]);
    }

    #[test]
    fn soc_cut_examples() {
        let c = soc_cut(&[3.0, 4.0], &[1, 2], 0).unwrap();
        assert_eq!(c.coeffs, vec![(0, 1.0), (1, -0.6), (2, -0.8)]);
        assert!(c.slack(&[4.0, 3.0, 4.0]) < 0.0);
        let c = soc_cut(&[1.0, 0.0, 0.0], &[1, 2, 3], 0).unwrap();
        assert_eq!(c.coeffs, vec![(0, 1.0), (1, -1.0)]);
        assert!(soc_cut(&[0.0, 0.0], &[1, 2], 0).is_none());
    }

    #[test]
    fn violation_examples() {
        assert!(close(PowerConePoint::new(1.0, 1.0, 2.0, 2).violation(), 1.0));
        assert!(PowerConePoint::new(4.0, 1.0, 1.0, 2).violation() <= 0.0);
    }

    fn random_cone_point(rng: &mut ChaCha8Rng, p: u32) -> PowerConePoint {
        let big_l = rng.gen_range(0.0..100.0);
        let z = rng.gen_range(0.0..100.0);
        let pt = PowerConePoint::new(big_l, z, 0.0, p);
        PowerConePoint { l: pt.surface() * rng.gen_range(0.0..=1.0), ..pt }
    }

    #[test]
    fn power_cuts_never_separate_cone_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in [2, 3, 5, 10] {
            for _ in 0..50 {
                let bad = PowerConePoint::new(
                    rng.gen_range(0.0..50.0),
                    rng.gen_range(0.1..50.0),
                    rng.gen_range(0.0..100.0),
                    p,
                );
                if bad.violation() <= 1e-6 {
                    continue;
                }
                let Ok(s) = project_power(bad) else { continue };
                let a = power_tangent(s).unwrap();
                let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max);
                assert!(a[0] * bad.big_l + a[1] * bad.z + a[2] * bad.l < -1e-9 * scale);
                for _ in 0..1000 {
                    let q = random_cone_point(&mut rng, p);
                    let lhs = a[0] * q.big_l + a[1] * q.z + a[2] * q.l;
                    assert!(lhs >= -1e-9 * scale * (1.0 + q.big_l + q.z), "{q:?} cut {a:?}");
                }
            }
        }
    }

    #[test]
    fn soc_cuts_never_separate_cone_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in 2..6 {
            for _ in 0..50 {
                let l0: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..10.0)).collect();
                let w = soc_weights(&l0).unwrap();
                for _ in 0..1000 {
                    let l: Vec<f64> = (0..m).map(|_| rng.gen_range(-10.0..10.0)).collect();
                    let norm = l.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let z = norm * rng.gen_range(1.0..2.0);
                    let rhs: f64 = w.iter().zip(&l).map(|(a, b)| a * b).sum();
                    assert!(z >= rhs - 1e-12);
                }
            }
        }
    }

    #[test]
    fn iterated_cuts_converge_to_the_two_norm() {
        // min z = L_1 + L_2 with (L_v, z, l_v) in P^{1/2,1/2} and l fixed.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let probe = [rng.gen_range(0.1..10.0), rng.gen_range(0.0..10.0)];
            let mut lp = LpModel::new();
            let z = lp.add_column(0.0, f64::INFINITY, 1.0).unwrap();
            let bl: Vec<usize> = (0..2).map(|_| lp.add_column(0.0, f64::INFINITY, 0.0).unwrap()).collect();
            let l: Vec<usize> = probe.iter().map(|&v| lp.add_column(v, v, 0.0).unwrap()).collect();
            lp.add_row(Row::new(vec![(z, 1.0), (bl[0], -1.0), (bl[1], -1.0)], Sense::Eq, 0.0)).unwrap();
            for &c in &l {
                lp.add_row(Row::new(vec![(z, 1.0), (c, -1.0)], Sense::Ge, 0.0)).unwrap();
            }
            let vm = VarMap {
                m: 2,
                n_vertices: 0,
                depot: 0,
                edges: vec![],
                x: vec![],
                y: vec![],
                l,
                z: Some(z),
                big_l: bl,
            };
            let spec = ModelSpec::new(Variant::PNorm(2), 2);
            let mut value = 0.0;
            for _ in 0..200 {
                let sol = lp.solve().unwrap();
                assert_eq!(sol.status, LpStatus::Optimal);
                value = sol.objective;
                let cuts = separate(&spec, &vm, &sol.x, 1e-9, 2);
                if cuts.is_empty() {
                    break;
                }
                for c in cuts {
                    lp.add_row(c.row(&vm)).unwrap();
                }
            }
            let norm = (probe[0] * probe[0] + probe[1] * probe[1]).sqrt();
            assert!((value - norm).abs() < 1e-5, "{value} vs {norm}");
        }
    }
}
