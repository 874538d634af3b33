//! The discrete tilde domain: nodes, metric terms, frames and derivative
//! operators in tilde coordinates.

use crate::conformal::{check_frames, ConformalFrame, FrameJet, FrameModel, IdentityReport, PlanePoint};
use crate::curve::ClosedCurve;
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};

use super::banded::{CsrBuilder, CsrMatrix};
use super::field::{ScalarField, VectorField};
use super::maps::{DiskMap, MapJet};
use super::{PolarGrid, ReferenceOps};

/// Chain-rule data at a node: `jac = ∂x/∂X`, `inv = ∂X/∂x` and the second
/// derivatives `hinv[a] = ∂²X_a/∂x∂x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeMetric {
    pub jac: Mat2,
    pub inv: Mat2,
    pub hinv: [Mat2; 2],
}

impl NodeMetric {
    fn from_jet(jac: Mat2, hess: [Mat2; 2]) -> Option<Self> {
        let inv = jac.inverse()?;
        // ∂²X_a/∂x_k∂x_l = −K_am ∂²x_m/∂X_b∂X_c K_bk K_cl
        let mut hinv = [Mat2::ZERO; 2];
        for (a, h) in hinv.iter_mut().enumerate() {
            let mut g = Mat2::ZERO;
            for (m, hm) in hess.iter().enumerate() {
                g = g + hm.scale(-inv.get(a, m));
            }
            *h = inv.transpose() * g * inv;
        }
        Some(NodeMetric { jac, inv, hinv })
    }
}

/// Derivative operators in tilde coordinates.
#[derive(Debug, Clone)]
pub struct Operators {
    /// `∂_1, ∂_2`
    pub d: [CsrMatrix; 2],
    /// `∂_11, ∂_12, ∂_22`
    pub dd: [CsrMatrix; 3],
    /// `∂_11 + ∂_22`
    pub lap: CsrMatrix,
}

impl Operators {
    /// Second-derivative operator for the index pair `(k, l)`.
    pub fn second(&self, k: usize, l: usize) -> &CsrMatrix {
        &self.dd[k + l]
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteDomain {
    grid: PolarGrid,
    nodes: Vec<PlanePoint>,
    metric: Vec<NodeMetric>,
    frame_model: FrameModel,
    jets: Vec<FrameJet>,
    normals: Vec<Vec2>,
    weights: Vec<f64>,
    ops: Operators,
    checksum: u64,
}

fn fnv(hash: &mut u64, bytes: &[u8]) {
    for b in bytes {
        *hash ^= *b as u64;
        *hash = hash.wrapping_mul(0x100000001b3);
    }
}

impl DiscreteDomain {
    /// Nodes and metric from an analytic disk map.
    pub fn from_map(map: &dyn DiskMap, grid: PolarGrid, frames: FrameModel) -> Result<Self> {
        let jets: Vec<MapJet> = (0..grid.len()).map(|i| map.jet(grid.reference_point(i))).collect();
        let nodes = jets.iter().map(|j| PlanePoint::new(j.pos[0], j.pos[1])).collect();
        let metric = jets
            .iter()
            .enumerate()
            .map(|(i, j)| {
                NodeMetric::from_jet(j.jac, j.hess).filter(|_| j.jac.det() > 0.0).ok_or_else(|| {
                    Error::IllPosed(format!("disk map is not orientation preserving at node {i}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(grid, nodes, metric, frames)
    }

    /// Nodes given directly; metric terms from discrete derivatives of the
    /// node coordinates.
    pub fn from_nodes(grid: PolarGrid, nodes: Vec<PlanePoint>, frames: FrameModel) -> Result<Self> {
        if nodes.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} nodes for a grid of {}",
                nodes.len(),
                grid.len()
            )));
        }
        let refs = grid.reference_ops();
        let xs: [Vec<f64>; 2] = [nodes.iter().map(|p| p.x).collect(), nodes.iter().map(|p| p.y).collect()];
        let d: Vec<[Vec<f64>; 2]> = (0..2).map(|m| [refs.d[0].apply(&xs[m]), refs.d[1].apply(&xs[m])]).collect();
        let dd: Vec<[Vec<f64>; 3]> = (0..2)
            .map(|m| [refs.dd[0].apply(&xs[m]), refs.dd[1].apply(&xs[m]), refs.dd[2].apply(&xs[m])])
            .collect();
        let metric = (0..grid.len())
            .map(|i| {
                let jac = Mat2::new(d[0][0][i], d[0][1][i], d[1][0][i], d[1][1][i]);
                let hess = [0, 1].map(|m| Mat2::new(dd[m][0][i], dd[m][1][i], dd[m][1][i], dd[m][2][i]));
                NodeMetric::from_jet(jac, hess).filter(|_| jac.det() > 0.0).ok_or_else(|| {
                    Error::ResolutionLost(format!("grid folds at node {i} (det = {:e})", jac.det()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(grid, nodes, metric, frames)
    }

    fn assemble(grid: PolarGrid, nodes: Vec<PlanePoint>, metric: Vec<NodeMetric>, frame_model: FrameModel) -> Result<Self> {
        let shift = frame_model.shift();
        let jets = nodes
            .iter()
            .map(|p| frame_model.jet(PlanePoint::new(p.x + shift[0], p.y + shift[1])))
            .collect::<Result<Vec<_>>>()?;
        let normals: Vec<Vec2> = grid
            .boundary()
            .map(|i| {
                let th = grid.theta(grid.angle_of(i));
                let t = metric[i].jac.mul_vec([-th.sin(), th.cos()]);
                let len = t[0].hypot(t[1]);
                [t[1] / len, -t[0] / len]
            })
            .collect();
        for (b, n) in normals.iter().enumerate() {
            let f = &jets[b].frame;
            let m = f.a_inv.mul_vec(f.a.mul_vec(*n));
            let mag = m[0] * m[0] + m[1] * m[1];
            if !(mag > 1e-12 && mag.is_finite()) {
                return Err(Error::IllPosed(format!("|A⁻¹ñ|² = {mag:e} at boundary node {b}")));
            }
        }
        let weights = (0..grid.len()).map(|i| grid.cell_area(i) * metric[i].jac.det()).collect();
        let ops = Self::build_ops(&grid, &metric);
        let mut checksum = 0xcbf29ce484222325_u64;
        fnv(&mut checksum, &(grid.rings() as u64).to_le_bytes());
        fnv(&mut checksum, &(grid.angles() as u64).to_le_bytes());
        for p in &nodes {
            fnv(&mut checksum, &p.x.to_bits().to_le_bytes());
            fnv(&mut checksum, &p.y.to_bits().to_le_bytes());
        }
        match frame_model {
            FrameModel::Conformal { shift } => {
                fnv(&mut checksum, b"conformal");
                shift.iter().for_each(|s| fnv(&mut checksum, &s.to_bits().to_le_bytes()));
            }
            FrameModel::Constant(a) => {
                fnv(&mut checksum, b"constant");
                a.0.iter().flatten().for_each(|s| fnv(&mut checksum, &s.to_bits().to_le_bytes()));
            }
        }
        Ok(DiscreteDomain {
            grid,
            nodes,
            metric,
            frame_model,
            jets,
            normals,
            weights,
            ops,
            checksum,
        })
    }

    fn build_ops(grid: &PolarGrid, metric: &[NodeMetric]) -> Operators {
        let refs: ReferenceOps = grid.reference_ops();
        let n = grid.len();
        let mut d: Vec<CsrBuilder> = (0..2).map(|_| CsrBuilder::new(n)).collect();
        let mut dd: Vec<CsrBuilder> = (0..3).map(|_| CsrBuilder::new(n)).collect();
        let mut lap = CsrBuilder::new(n);
        let ref_dd = |a: usize, b: usize| &refs.dd[a + b];
        for (i, m) in metric.iter().enumerate() {
            let k = &m.inv;
            for (kk, builder) in d.iter_mut().enumerate() {
                for a in 0..2 {
                    let c = k.get(a, kk);
                    refs.d[a].row(i).for_each(|(col, w)| builder.add(col, c * w));
                }
                builder.finish_row();
            }
            for (slot, (kk, ll)) in [(0, 0), (0, 1), (1, 1)].into_iter().enumerate() {
                let mut add = |col: usize, v: f64| {
                    dd[slot].add(col, v);
                    if kk == ll {
                        lap.add(col, v);
                    }
                };
                for a in 0..2 {
                    for b in 0..2 {
                        let c = k.get(a, kk) * k.get(b, ll);
                        ref_dd(a, b).row(i).for_each(|(col, w)| add(col, c * w));
                    }
                    let c = m.hinv[a].get(kk, ll);
                    refs.d[a].row(i).for_each(|(col, w)| add(col, c * w));
                }
                dd[slot].finish_row();
            }
            lap.finish_row();
        }
        let mut d = d.into_iter().map(CsrBuilder::build);
        let mut dd = dd.into_iter().map(CsrBuilder::build);
        Operators {
            d: [d.next().unwrap(), d.next().unwrap()],
            dd: [dd.next().unwrap(), dd.next().unwrap(), dd.next().unwrap()],
            lap: lap.build(),
        }
    }

    /// Same geometry with a different frame attachment.
    pub fn with_frames(&self, frames: FrameModel) -> Result<Self> {
        Self::assemble(self.grid, self.nodes.clone(), self.metric.clone(), frames)
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[PlanePoint] {
        &self.nodes
    }

    pub fn metric(&self, i: usize) -> &NodeMetric {
        &self.metric[i]
    }

    pub fn frame_model(&self) -> FrameModel {
        self.frame_model
    }

    #[inline]
    pub fn frame(&self, i: usize) -> &ConformalFrame {
        &self.jets[i].frame
    }

    #[inline]
    pub fn frame_jet(&self, i: usize) -> &FrameJet {
        &self.jets[i]
    }

    pub fn frame_report(&self) -> IdentityReport {
        check_frames(&self.jets.iter().map(|j| j.frame).collect::<Vec<_>>())
    }

    /// Boundary node indices.
    pub fn boundary(&self) -> std::ops::Range<usize> {
        self.grid.boundary()
    }

    #[inline]
    pub fn is_boundary(&self, i: usize) -> bool {
        self.grid.is_boundary(i)
    }

    /// Outward unit tilde normal `ñ₀` at boundary node `b`.
    pub fn normal(&self, b: usize) -> Vec2 {
        self.normals[b]
    }

    /// `A⁻¹ñ₀`, the physical-direction normal carried to the tilde frame.
    pub fn stress_normal(&self, b: usize) -> Vec2 {
        self.frame(b).a_inv.mul_vec(self.normals[b])
    }

    /// Tilde area of the node's cell.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn ops(&self) -> &Operators {
        &self.ops
    }

    pub fn checksum(&self) -> u64 {
        self.checksum
    }

    /// The boundary ring as a closed curve.
    pub fn boundary_curve(&self) -> Result<ClosedCurve> {
        ClosedCurve::new(self.boundary().map(|i| self.nodes[i]).collect(), std::f64::consts::TAU)
    }

    pub fn sample_scalar(&self, f: impl Fn(PlanePoint) -> f64) -> ScalarField {
        ScalarField(self.nodes.iter().map(|p| f(*p)).collect())
    }

    pub fn sample_vector(&self, f: impl Fn(PlanePoint) -> [f64; 2]) -> VectorField {
        VectorField::from_fn(self.len(), |i| f(self.nodes[i]))
    }

    /// `∇f` per node.
    pub fn gradient_scalar(&self, f: &[f64]) -> Vec<Vec2> {
        let (gx, gy) = (self.ops.d[0].apply(f), self.ops.d[1].apply(f));
        gx.into_iter().zip(gy).map(|(a, b)| [a, b]).collect()
    }

    /// `(∇v)_{ik} = ∂_k v_i` per node.
    pub fn gradient(&self, v: &VectorField) -> Vec<Mat2> {
        let d = |c: usize, k: usize| self.ops.d[k].apply(v.component(c));
        let (a, b, c, e) = (d(0, 0), d(0, 1), d(1, 0), d(1, 1));
        (0..self.len()).map(|i| Mat2::new(a[i], b[i], c[i], e[i])).collect()
    }

    pub fn laplacian(&self, v: &VectorField) -> VectorField {
        VectorField([self.ops.lap.apply(v.component(0)), self.ops.lap.apply(v.component(1))])
    }

    /// Physical `L²` norm: `(Σ w |v|²/Q²)^{1/2}`.
    pub fn physical_norm(&self, v: &VectorField) -> f64 {
        (0..self.len())
            .map(|i| {
                let [a, b] = v.at(i);
                self.weights[i] * (a * a + b * b) / self.frame(i).q2
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn physical_norm_scalar(&self, f: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| self.weights[i] * f[i] * f[i] / self.frame(i).q2)
            .sum::<f64>()
            .sqrt()
    }

    /// Plain tilde `L²` norm.
    pub fn l2_scalar(&self, f: &[f64]) -> f64 {
        (0..self.len()).map(|i| self.weights[i] * f[i] * f[i]).sum::<f64>().sqrt()
    }

    pub fn l2_vector(&self, v: &VectorField) -> f64 {
        (self.l2_scalar(v.component(0)).powi(2) + self.l2_scalar(v.component(1)).powi(2)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::maps::{Ellipse, LogDisk};

    fn errors(dom: &DiscreteDomain) -> [f64; 6] {
        let f = |p: PlanePoint| (p.x * 0.7).sin() * (1.3 * p.y).cos() + p.x * p.y * p.y;
        let ex: [Box<dyn Fn(PlanePoint) -> f64>; 6] = [
            Box::new(|p| 0.7 * (p.x * 0.7).cos() * (1.3 * p.y).cos() + p.y * p.y),
            Box::new(|p| -1.3 * (p.x * 0.7).sin() * (1.3 * p.y).sin() + 2.0 * p.x * p.y),
            Box::new(|p| -0.49 * (p.x * 0.7).sin() * (1.3 * p.y).cos()),
            Box::new(|p| -0.91 * (p.x * 0.7).cos() * (1.3 * p.y).sin() + 2.0 * p.y),
            Box::new(|p| -1.69 * (p.x * 0.7).sin() * (1.3 * p.y).cos() + 2.0 * p.x),
            Box::new(|p| -2.18 * (p.x * 0.7).sin() * (1.3 * p.y).cos() + 2.0 * p.x),
        ];
        let v = dom.sample_scalar(f);
        let o = dom.ops();
        let ops = [&o.d[0], &o.d[1], &o.dd[0], &o.dd[1], &o.dd[2], &o.lap];
        let mut out = [0.0; 6];
        for k in 0..6 {
            let got = ops[k].apply(&v);
            let want = dom.sample_scalar(&ex[k]);
            let diff: Vec<f64> = got.iter().zip(want.iter()).map(|(a, b)| a - b).collect();
            out[k] = dom.l2_scalar(&diff);
        }
        out
    }

    #[test]
    fn tilde_operators_converge_on_mapped_domains() {
        for analytic in [true, false] {
            let mut errs = Vec::new();
            for (nr, nt) in [(12, 32), (24, 64)] {
                let g = PolarGrid::new(nr, nt).unwrap();
                let map = LogDisk { mu: 0.1, a: 0.3, b: 0.9 };
                let mut dom = DiscreteDomain::from_map(&map, g, FrameModel::default()).unwrap();
                if !analytic {
                    dom = DiscreteDomain::from_nodes(g, dom.nodes().to_vec(), FrameModel::default()).unwrap();
                }
                errs.push(errors(&dom));
            }
            for k in 0..6 {
                let order = (errs[0][k] / errs[1][k]).log2();
                assert!(order > 1.7, "analytic={analytic} op {k}: {:e} -> {:e}", errs[0][k], errs[1][k]);
            }
        }
    }

    #[test]
    fn frames_and_normals() {
        let g = PolarGrid::new(8, 16).unwrap();
        let dom = DiscreteDomain::from_map(&Ellipse::disk([2.0, 0.0], 0.5), g, FrameModel::default()).unwrap();
        assert!(dom.frame_report().max() < 1e-12);
        let n = dom.normal(0);
        assert!((n[0] - 1.0).abs() < 1e-14 && n[1].abs() < 1e-14);
        let area: f64 = (0..dom.len()).map(|i| dom.weight(i)).sum();
        assert!((area - std::f64::consts::PI * 0.25).abs() < 1e-12);
        let shifted = dom.with_frames(FrameModel::Conformal { shift: [1e-3, 0.0] }).unwrap();
        assert_ne!(shifted.checksum(), dom.checksum());
        assert!((shifted.frame(0).q2 - 1.0 / (4.0 * 2.501_f64.powi(2))).abs() < 1e-14);
    }
}
