use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Polygon, Vec2, Vec3};

/// Distance measured from one anchor. Anchors may sit above the ground; the
/// solved position is on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub anchor: Vec3,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution {
    pub position: Vec2,
    /// Root-mean-square range residual (m).
    pub residual_rms: f64,
    pub iterations: usize,
}

const MAX_ITERATIONS: usize = 200;

/// Least-squares ground position minimising Σ(‖p − anchorᵢ‖ − dᵢ)².
///
/// Two ranges are solved by circle intersection, with `prior` picking between
/// the mirror solutions. Three or more start from the linearised solution and
/// are refined with damped Gauss–Newton.
pub fn trilaterate(ranges: &[Range], prior: Option<&Polygon>) -> Result<Solution> {
    if ranges.len() < 2 {
        return Err(Error::InsufficientRanges {
            need: 2,
            have: ranges.len(),
        });
    }
    if ranges
        .iter()
        .any(|r| !(r.distance >= 0.0) || !r.anchor.is_finite())
    {
        return Err(Error::InvalidParameter {
            entity: "ranges".into(),
            reason: "distances must be finite and non-negative",
        });
    }
    if ranges.len() == 2 {
        return two_anchor(ranges, prior);
    }
    if collinear(ranges) {
        return Err(Error::DegenerateGeometry);
    }
    let start = linear_estimate(ranges).unwrap_or_else(|| weighted_centroid(ranges));
    refine(ranges, start)
}

fn horizontal_radius(r: &Range) -> f64 {
    let z = r.anchor.z;
    libm::sqrt((r.distance * r.distance - z * z).max(0.0))
}

fn two_anchor(ranges: &[Range], prior: Option<&Polygon>) -> Result<Solution> {
    let (c1, c2) = (ranges[0].anchor.xy(), ranges[1].anchor.xy());
    let (r1, r2) = (horizontal_radius(&ranges[0]), horizontal_radius(&ranges[1]));
    let baseline = c2 - c1;
    let d = baseline.norm();
    let e = baseline.normalized().ok_or(Error::DegenerateGeometry)?;
    let a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
    let h2 = r1 * r1 - a * a;
    let tangent_tol = 1e-12 * (r1 * r1).max(1.0);

    if h2 > tangent_tol {
        let h = libm::sqrt(h2);
        let base = c1 + e * a;
        let candidates = [base + e.perp() * h, base - e.perp() * h];
        let inside: Vec<Vec2> = match prior {
            Some(region) => candidates
                .iter()
                .copied()
                .filter(|p| region.contains(*p))
                .collect(),
            None => candidates.to_vec(),
        };
        return match inside.as_slice() {
            [p] => Ok(Solution {
                position: *p,
                residual_rms: rms(ranges, *p),
                iterations: 0,
            }),
            _ => Err(Error::AmbiguousSolution),
        };
    }

    // Circles touch or miss: the minimiser lies on the line through the anchors.
    let s = if r1 + r2 <= d {
        0.5 * (d + r1 - r2)
    } else if r1 >= r2 + d {
        0.5 * (r1 + r2 + d)
    } else if r2 >= r1 + d {
        -0.5 * (r1 + r2 - d)
    } else {
        a
    };
    let p = c1 + e * s;
    let solution = if ranges.iter().all(|r| r.anchor.z == 0.0) || h2.abs() <= tangent_tol {
        Solution {
            position: p,
            residual_rms: rms(ranges, p),
            iterations: 0,
        }
    } else {
        refine(ranges, p)?
    };
    match prior {
        Some(region) if !region.contains(solution.position) => Err(Error::SolverDiverged),
        _ => Ok(solution),
    }
}

fn collinear(ranges: &[Range]) -> bool {
    let c0 = ranges[0].anchor.xy();
    let scale = ranges
        .iter()
        .map(|r| r.anchor.xy().distance(c0))
        .fold(0.0, f64::max)
        .max(1e-9);
    let far = ranges
        .iter()
        .map(|r| r.anchor.xy())
        .max_by(|a, b| a.distance(c0).total_cmp(&b.distance(c0)))
        .unwrap_or(c0);
    let dir = far - c0;
    ranges
        .iter()
        .all(|r| dir.cross(r.anchor.xy() - c0).abs() <= 1e-9 * scale * scale)
}

/// Subtracts the first range equation from the others and solves the resulting
/// linear system in the least-squares sense.
fn linear_estimate(ranges: &[Range]) -> Option<Vec2> {
    let r0 = &ranges[0];
    let c0 = r0.anchor.xy();
    let k0 = c0.dot(c0) + r0.anchor.z * r0.anchor.z - r0.distance * r0.distance;
    let (mut ata, mut atb) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
    for r in &ranges[1..] {
        let c = r.anchor.xy();
        let row = (c - c0) * 2.0;
        let rhs = c.dot(c) + r.anchor.z * r.anchor.z - r.distance * r.distance - k0;
        ata[0][0] += row.x * row.x;
        ata[0][1] += row.x * row.y;
        ata[1][1] += row.y * row.y;
        atb[0] += row.x * rhs;
        atb[1] += row.y * rhs;
    }
    ata[1][0] = ata[0][1];
    let det = ata[0][0] * ata[1][1] - ata[0][1] * ata[1][0];
    let norm = ata[0][0] + ata[1][1];
    if det.abs() <= 1e-12 * norm * norm {
        return None;
    }
    let p = Vec2::new(
        (atb[0] * ata[1][1] - atb[1] * ata[0][1]) / det,
        (ata[0][0] * atb[1] - ata[1][0] * atb[0]) / det,
    );
    p.is_finite().then_some(p)
}

fn weighted_centroid(ranges: &[Range]) -> Vec2 {
    let mut acc = Vec2::ZERO;
    let mut total = 0.0;
    for r in ranges {
        let w = 1.0 / (r.distance + 1e-3);
        acc += r.anchor.xy() * w;
        total += w;
    }
    acc * (1.0 / total)
}

fn residuals(ranges: &[Range], p: Vec2) -> impl Iterator<Item = (f64, Vec2)> + '_ {
    ranges.iter().map(move |r| {
        let dxy = p - r.anchor.xy();
        let rho = libm::sqrt(dxy.dot(dxy) + r.anchor.z * r.anchor.z);
        let grad = if rho > 1e-12 {
            dxy * (1.0 / rho)
        } else {
            Vec2::ZERO
        };
        (rho - r.distance, grad)
    })
}

fn cost(ranges: &[Range], p: Vec2) -> f64 {
    residuals(ranges, p).map(|(r, _)| r * r).sum()
}

fn rms(ranges: &[Range], p: Vec2) -> f64 {
    libm::sqrt(cost(ranges, p) / ranges.len() as f64)
}

fn refine(ranges: &[Range], start: Vec2) -> Result<Solution> {
    let mut p = start;
    let mut current = cost(ranges, p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (mut jtj, mut jtr) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for (r, g) in residuals(ranges, p) {
            jtj[0][0] += g.x * g.x;
            jtj[0][1] += g.x * g.y;
            jtj[1][1] += g.y * g.y;
            jtr[0] += g.x * r;
            jtr[1] += g.y * r;
        }
        jtj[1][0] = jtj[0][1];
        if jtr[0].abs() + jtr[1].abs() < 1e-15 {
            break;
        }
        let mut improved = false;
        for _ in 0..32 {
            let a = [
                [jtj[0][0] * (1.0 + lambda) + 1e-15, jtj[0][1]],
                [jtj[1][0], jtj[1][1] * (1.0 + lambda) + 1e-15],
            ];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let step = Vec2::new(
                -(jtr[0] * a[1][1] - jtr[1] * a[0][1]) / det,
                -(a[0][0] * jtr[1] - a[1][0] * jtr[0]) / det,
            );
            let candidate = p + step;
            let c = cost(ranges, candidate);
            if c.is_finite() && c <= current {
                let small = step.norm() <= 1e-13 * (1.0 + p.norm());
                p = candidate;
                current = c;
                lambda = (lambda / 3.0).max(1e-12);
                improved = !small;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    if !p.is_finite() || !current.is_finite() {
        return Err(Error::SolverDiverged);
    }
    Ok(Solution {
        position: p,
        residual_rms: libm::sqrt(current / ranges.len() as f64),
        iterations,
    })
}
