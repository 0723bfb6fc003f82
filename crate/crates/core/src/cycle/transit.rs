//! Transversal sections and the jets of section-to-section transit maps.

use nalgebra::{DMatrix, DVector};

use super::CycleError;
use crate::flow::FlowHandle;
use crate::linalg::RMatrix;
use crate::vfield::{Jet, MapJet};

/// Affine hyperplane through `origin` orthogonal to the unit `normal`,
/// with an orthonormal basis of the hyperplane in the columns of `basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub origin: Vec<f64>,
    pub normal: Vec<f64>,
    pub basis: RMatrix,
}

impl Section {
    /// Section through `point` orthogonal to the field there. The basis is
    /// Gram–Schmidt on the standard basis, so it is deterministic.
    pub fn through(handle: &FlowHandle, point: &[f64]) -> Result<Self, CycleError> {
        let f = handle.rhs(point)?;
        let nf = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(nf > 0.0) {
            return Err(CycleError::Degenerate("vector field vanishes on the cycle".into()));
        }
        let n = point.len();
        let normal: Vec<f64> = f.iter().map(|v| v / nf).collect();
        let mut cols: Vec<DVector<f64>> = vec![DVector::from_vec(normal.clone())];
        let mut basis = Vec::new();
        // Visit standard basis vectors from the least aligned with the normal.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| normal[a].abs().total_cmp(&normal[b].abs()).then(a.cmp(&b)));
        for &i in &order {
            let mut v = DVector::<f64>::zeros(n);
            v[i] = 1.0;
            for c in &cols {
                let d = c.dot(&v);
                v -= c * d;
            }
            let nv = v.norm();
            if nv > 1e-8 {
                v /= nv;
                cols.push(v.clone());
                basis.push(v);
            }
            if basis.len() == n - 1 {
                break;
            }
        }
        // Orientation: the basis should not depend on which axes happened to
        // be visited first, so sort columns by their dominant axis.
        basis.sort_by_key(|v| v.iamax());
        for v in basis.iter_mut() {
            if v[v.iamax()] < 0.0 {
                *v = -v.clone();
            }
        }
        Ok(Self {
            origin: point.to_vec(),
            normal,
            basis: DMatrix::from_columns(&basis),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Signed distance along the normal.
    pub fn height(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.origin).zip(&self.normal).map(|((a, b), n)| (a - b) * n).sum()
    }

    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = x.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        (0..self.dim())
            .map(|c| (0..d.len()).map(|r| self.basis[(r, c)] * d[r]).sum())
            .collect()
    }

    /// Seed jet `origin + basis u` in the section coordinates `u`.
    pub fn seed(&self, order: usize) -> MapJet<f64> {
        let d = self.dim();
        MapJet::new(
            (0..self.origin.len())
                .map(|r| {
                    let mut j = Jet::constant(d, order, self.origin[r]);
                    for c in 0..d {
                        j.set_coeff(&unit(d, c), self.basis[(r, c)]);
                    }
                    j
                })
                .collect(),
        )
    }
}

fn unit(d: usize, c: usize) -> Vec<u32> {
    let mut m = vec![0; d];
    m[c] = 1;
    m
}

/// Jets of the transit from one section to another: section coordinates
/// of the landing point and the time of flight, both in the coordinates
/// of the departure section.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionTransit {
    pub map: MapJet<f64>,
    pub time: Jet<f64>,
    /// Section coordinates at which the central orbit actually landed.
    /// The map is re-centred to send 0 to 0: for a contracting cycle the
    /// closure error would otherwise be amplified by `e^{-tA}` downstream.
    pub landing_offset: Vec<f64>,
}

impl SectionTransit {
    /// `T(u) - T(0)`.
    pub fn delta(&self) -> Jet<f64> {
        let mut d = self.time.clone();
        d.coeffs_mut()[0] = 0.0;
        d
    }
}

/// Flow `from` for about `nominal` time units and land on `to`.
///
/// The flow jet is transported numerically; the correction `delta(u)` of
/// the landing time comes from a Picard expansion of the flow in time
/// around the end point followed by a fixed-point solve of
/// `<n, z(u, delta(u)) - origin> = 0`, which gains one order per sweep.
pub fn section_transit(
    handle: &FlowHandle,
    from: &Section,
    to: &Section,
    nominal: f64,
    order: usize,
) -> Result<SectionTransit, CycleError> {
    let d = from.dim();
    let n = from.origin.len();
    let landed = handle.transport(&from.seed(order), nominal)?;
    let miss = to.height(&landed.value());
    let f_end = handle.rhs(&landed.value())?;
    let speed: f64 = f_end.iter().zip(&to.normal).map(|(a, b)| a * b).sum();
    if miss.abs() > 1e-6 * (1.0 + speed.abs()) || speed.abs() < 1e-12 {
        return Err(CycleError::Degenerate(format!(
            "transit of {nominal} does not land on the target section (height {miss:.3e}, normal speed {speed:.3e})"
        )));
    }

    // z(u, t) = Z(u) + int_0^t f(z) dt in d + 1 variables.
    let z0: Vec<Jet<f64>> = landed.components.iter().map(|c| c.extend_vars(d + 1, order)).collect();
    let mut z = z0.clone();
    for _ in 0..=order {
        let fz = handle.program().eval(&z)?;
        z = z0.iter().zip(&fz).map(|(a, f)| a + &f.integrate(d)).collect();
    }

    let vars: Vec<Jet<f64>> = (0..d).map(|i| Jet::variable(d, order, i, 0.0)).collect();
    let height = |delta: &Jet<f64>| -> Result<(Jet<f64>, Vec<Jet<f64>>), CycleError> {
        let mut args = vars.clone();
        args.push(delta.clone());
        let pts: Vec<Jet<f64>> = z.iter().map(|c| c.compose(&args)).collect();
        let mut h = Jet::zero(d, order);
        for r in 0..n {
            let mut c = pts[r].clone();
            c.coeffs_mut()[0] -= to.origin[r];
            h = &h + &c.scale(to.normal[r]);
        }
        Ok((h, pts))
    };
    let mut delta = Jet::zero(d, order);
    let mut pts = Vec::new();
    for _ in 0..=order + 1 {
        let (h, p) = height(&delta)?;
        pts = p;
        delta = &delta - &h.scale(1.0 / speed);
    }
    let (h, p) = height(&delta)?;
    if h.max_abs() > 1e-8 * (1.0 + delta.max_abs()) {
        return Err(CycleError::Degenerate(format!("landing-time expansion did not settle ({:.3e})", h.max_abs())));
    }
    if !p.is_empty() {
        pts = p;
    }
    let map = MapJet::new(
        (0..to.dim())
            .map(|c| {
                let mut acc = Jet::zero(d, order);
                for r in 0..n {
                    let mut comp = pts[r].clone();
                    comp.coeffs_mut()[0] -= to.origin[r];
                    acc = &acc + &comp.scale(to.basis[(r, c)]);
                }
                acc
            })
            .collect(),
    );
    let mut map = map;
    let landing_offset = map.value();
    for c in map.components.iter_mut() {
        c.coeffs_mut()[0] = 0.0;
    }
    let mut time = delta;
    time.coeffs_mut()[0] = nominal;
    Ok(SectionTransit {
        map,
        time,
        landing_offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vfield::parse_field;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    #[test]
    fn stuart_landau_return_map() {
        let h = FlowHandle::flow(
            parse_field(
                "[x1*(1 - x1^2 - x2^2) - x2, x2*(1 - x1^2 - x2^2) + x1]",
                2,
                &BTreeMap::new(),
            )
            .unwrap(),
        );
        let s = Section::through(&h, &[1.0, 0.0]).unwrap();
        assert_eq!(s.basis[(0, 0)], 1.0);
        let t = section_transit(&h, &s, &s, 2.0 * PI, 4).unwrap();
        // Radial dynamics are autonomous: the return time is exactly 2 pi
        // and r' = r(1 - r^2) over 2 pi is the return map.
        assert!(t.delta().max_abs() < 1e-9);
        let lin = t.map.components[0].coeff(&[1]);
        assert!((lin - (-4.0 * PI).exp()).abs() < 1e-12);
    }

    #[test]
    fn rotated_transit_time() {
        let h = FlowHandle::flow(parse_field("[-x2 + x1*(1 - x1^2 - x2^2), x1 + x2*(1 - x1^2 - x2^2)]", 2, &BTreeMap::new()).unwrap());
        let from = Section::through(&h, &[1.0, 0.0]).unwrap();
        let to = Section::through(&h, &[0.0, 1.0]).unwrap();
        let t = section_transit(&h, &from, &to, PI / 2.0, 3).unwrap();
        assert!((t.time.value() - PI / 2.0).abs() < 1e-12);
        // The section through (0, 1) has basis (0, 1) after orientation.
        assert!(t.map.value()[0].abs() < 1e-10);
    }
}
