use serde::{Deserialize, Serialize};

use super::PositionEstimate;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scene::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub radar_id: String,
    pub radar_position_m: Vec3,
    pub range_m: f64,
}

impl Observation {
    pub fn new(radar_id: impl Into<String>, radar_position_m: Vec3, range_m: f64) -> Self {
        Self {
            radar_id: radar_id.into(),
            radar_position_m,
            range_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub step_tolerance_m: f64,
    /// A point on the tag's side of the radars' plane (or line, in 2D) when
    /// the radars alone cannot tell the mirror solutions apart.
    pub hint: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            step_tolerance_m: 1e-6,
            hint: None,
        }
    }
}

type V<T> = Vec<T>;

fn dotv<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

fn normv<T: Real>(a: &[T]) -> T {
    dotv(a, a).sqrt()
}

fn subv<T: Real>(a: &[T], b: &[T]) -> V<T> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve<T: Real>(mut a: Vec<V<T>>, mut b: V<T>) -> Option<V<T>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() <= T::epsilon() * T::lit(1e-3) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for (i, r) in rest.iter_mut().enumerate() {
            let f = r[col] / pivot_row[col];
            for (x, &p) in r[col..].iter_mut().zip(&pivot_row[col..]) {
                *x = *x - f * p;
            }
            b[col + 1 + i] = b[col + 1 + i] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let s = (row + 1..n).fold(b[row], |s, k| s - a[row][k] * x[k]);
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Orthonormal basis of the affine hull of `pts` around `pts[0]`.
fn hull_basis<T: Real>(pts: &[V<T>]) -> Vec<V<T>> {
    let scale = pts
        .iter()
        .map(|p| normv(&subv(p, &pts[0])))
        .fold(T::zero(), T::max)
        .max(T::one());
    let tol = scale * T::lit(1e-9).max(T::epsilon() * T::lit(100.0));
    let mut basis: Vec<V<T>> = Vec::new();
    for p in &pts[1..] {
        let mut v = subv(p, &pts[0]);
        for b in &basis {
            let c = dotv(&v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x = *x - c * *y;
            }
        }
        let n = normv(&v);
        if n > tol {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

fn unit_normal<T: Real>(basis: &[V<T>], dims: usize) -> V<T> {
    if dims == 2 {
        vec![-basis[0][1], basis[0][0]]
    } else {
        let (a, b) = (&basis[0], &basis[1]);
        let n = vec![
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let l = normv(&n);
        n.into_iter().map(|x| x / l).collect()
    }
}

/// Linearised closed-form start: least squares inside the radars' hull,
/// plus the out-of-hull offset when the hull is one dimension short.
fn initial_guess<T: Real>(anchors: &[V<T>], ranges: &[T], basis: &[V<T>], dims: usize, hint: Option<&[T]>) -> V<T> {
    let h = basis.len();
    let two = T::lit(2.0);
    let coords: Vec<V<T>> = anchors
        .iter()
        .map(|a| {
            let d = subv(a, &anchors[0]);
            basis.iter().map(|b| dotv(&d, b)).collect()
        })
        .collect();
    let mut ata = vec![vec![T::zero(); h]; h];
    let mut atb = vec![T::zero(); h];
    for i in 1..anchors.len() {
        let row: V<T> = coords[i].iter().map(|c| two * *c).collect();
        let rhs = dotv(&coords[i], &coords[i]) - ranges[i] * ranges[i] + ranges[0] * ranges[0];
        for r in 0..h {
            for c in 0..h {
                ata[r][c] = ata[r][c] + row[r] * row[c];
            }
            atb[r] = atb[r] + row[r] * rhs;
        }
    }
    let u = solve(ata, atb).unwrap_or_else(|| vec![T::zero(); h]);
    let mut p = anchors[0].clone();
    for (b, ui) in basis.iter().zip(&u) {
        for (x, y) in p.iter_mut().zip(b) {
            *x = *x + *ui * *y;
        }
    }
    if h == dims {
        return p;
    }
    let n = unit_normal(basis, dims);
    let m = T::from_usize(anchors.len()).unwrap();
    let z2 = coords.iter().zip(ranges).fold(T::zero(), |s, (c, d)| {
        let du = subv(&u, c);
        s + *d * *d - dotv(&du, &du)
    }) / m;
    let z = z2.max(T::zero()).sqrt();
    let sign = match hint {
        Some(hp) if dotv(&subv(hp, &p), &n) < T::zero() => -T::one(),
        _ => T::one(),
    };
    p.iter().zip(&n).map(|(x, y)| *x + sign * z * *y).collect()
}

fn cost<T: Real>(p: &[T], anchors: &[V<T>], ranges: &[T]) -> T {
    anchors.iter().zip(ranges).fold(T::zero(), |s, (a, d)| {
        let r = normv(&subv(p, a)) - *d;
        s + r * r
    })
}

/// Least-squares position from ranges to known radar positions.
pub fn trilaterate(
    observations: &[Observation],
    dims: usize,
    initial_guess: Option<&[f64]>,
) -> Result<PositionEstimate> {
    trilaterate_in::<f64>(observations, dims, initial_guess, &SolverOptions::default())
}

/// Levenberg-Marquardt multilateration carried out in scalar type `T`.
pub fn trilaterate_in<T: Real>(
    observations: &[Observation],
    dims: usize,
    guess: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<PositionEstimate> {
    if dims != 2 && dims != 3 {
        return Err(Error::Geometry(format!("dimension must be 2 or 3, got {dims}")));
    }
    if observations.len() < dims {
        return Err(Error::Geometry(format!(
            "{dims}D needs at least {dims} ranges, got {}",
            observations.len()
        )));
    }
    if let Some(o) = observations
        .iter()
        .find(|o| !(o.range_m >= 0.0 && o.range_m.is_finite()))
    {
        return Err(Error::Geometry(format!(
            "invalid range {} from `{}`",
            o.range_m, o.radar_id
        )));
    }
    let anchors: Vec<V<T>> = observations
        .iter()
        .map(|o| o.radar_position_m[..dims].iter().map(|x| T::lit(*x)).collect())
        .collect();
    let ranges: V<T> = observations.iter().map(|o| T::lit(o.range_m)).collect();
    let basis = hull_basis(&anchors);
    if basis.len() + 1 < dims {
        return Err(Error::Geometry(if dims == 2 {
            "all radars coincide".into()
        } else {
            "radars are collinear".into()
        }));
    }

    let hint: Option<V<T>> = opts
        .hint
        .as_ref()
        .map(|h| h.iter().take(dims).map(|x| T::lit(*x)).collect());
    let mut p: V<T> = match guess {
        Some(g) if g.len() >= dims => g[..dims].iter().map(|x| T::lit(*x)).collect(),
        Some(g) => {
            return Err(Error::Geometry(format!(
                "initial guess has {} coordinates, need {dims}",
                g.len()
            )));
        }
        None => initial_guess(&anchors, &ranges, &basis, dims, hint.as_deref()),
    };

    let tol = T::lit(opts.step_tolerance_m);
    let mut lambda = T::lit(1e-3);
    let mut current = cost(&p, &anchors, &ranges);
    let m = T::from_usize(anchors.len()).unwrap();
    let finish = |p: &V<T>, c: T, iterations: usize| PositionEstimate {
        tag_id: None,
        position_m: p.iter().map(|x| x.as_f64()).collect(),
        residual_m: (c / m).sqrt().as_f64(),
        used_radars: observations.iter().map(|o| o.radar_id.clone()).collect(),
        iterations,
    };

    for it in 1..=opts.max_iterations {
        let mut jtj = vec![vec![T::zero(); dims]; dims];
        let mut jtr = vec![T::zero(); dims];
        for (a, d) in anchors.iter().zip(&ranges) {
            let diff = subv(&p, a);
            let dist = normv(&diff);
            if dist == T::zero() {
                continue;
            }
            let j: V<T> = diff.iter().map(|x| *x / dist).collect();
            let r = dist - *d;
            for i in 0..dims {
                for k in 0..dims {
                    jtj[i][k] = jtj[i][k] + j[i] * j[k];
                }
                jtr[i] = jtr[i] + j[i] * r;
            }
        }
        loop {
            let mut a = jtj.clone();
            for (i, row) in a.iter_mut().enumerate() {
                row[i] = row[i] + lambda * (jtj[i][i] + T::lit(1e-9));
            }
            let step = solve(a, jtr.iter().map(|g| -*g).collect());
            let Some(step) = step else {
                lambda = lambda * T::lit(10.0);
                if lambda > T::lit(1e12) {
                    return Ok(finish(&p, current, it));
                }
                continue;
            };
            let trial: V<T> = p.iter().zip(&step).map(|(x, s)| *x + *s).collect();
            let c = cost(&trial, &anchors, &ranges);
            if c <= current {
                p = trial;
                current = c;
                lambda = (lambda / T::lit(10.0)).max(T::lit(1e-12));
                if normv(&step) < tol {
                    return Ok(finish(&p, current, it));
                }
                break;
            }
            lambda = lambda * T::lit(10.0);
            if lambda > T::lit(1e12) {
                // no descent direction left at working precision
                return Ok(finish(&p, current, it));
            }
        }
    }
    Err(Error::NonConvergence {
        position: p.iter().map(|x| x.as_f64()).collect(),
        residual_m: (current / m).sqrt().as_f64(),
        iterations: opts.max_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(radars: &[Vec3], truth: Vec3, dims: usize) -> Vec<Observation> {
        radars
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let d: f64 = (0..dims).map(|k| (truth[k] - r[k]).powi(2)).sum::<f64>().sqrt();
                Observation::new(format!("r{i}"), *r, d)
            })
            .collect()
    }

    #[test]
    fn exact_ranges_in_2d() {
        let radars = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [3.0, 7.0, 0.0]];
        let truth = [4.2, 5.5, 0.0];
        let e = trilaterate(&obs(&radars, truth, 2), 2, None).unwrap();
        assert!(e.error_to(&truth) < 1e-9);
        assert!(e.residual_m < 1e-9);
        assert_eq!(e.used_radars, vec!["r0", "r1", "r2"]);
    }

    #[test]
    fn two_radars_in_2d_take_the_hinted_side() {
        let radars = [[0.0, 0.0, 0.0], [100.0, 0.0, 0.0]];
        for truth in [[50.0f64, 86.6, 0.0], [50.0, -86.6, 0.0]] {
            let opts = SolverOptions {
                hint: Some(vec![50.0, truth[1].signum() * 10.0]),
                ..SolverOptions::default()
            };
            let e = trilaterate_in::<f64>(&obs(&radars, truth, 2), 2, None, &opts).unwrap();
            assert!(e.error_to(&truth) < 1e-9, "{:?}", e.position_m);
        }
    }

    #[test]
    fn three_coplanar_radars_in_3d() {
        let radars = [[1.8, 1.25, -1.2], [1.8, -1.25, -1.2], [0.0, -1.25, -1.2]];
        let truth = [0.7, 0.3, 1.9];
        let opts = SolverOptions {
            hint: Some(vec![1.0, 0.0, 2.0]),
            ..SolverOptions::default()
        };
        let e = trilaterate_in::<f64>(&obs(&radars, truth, 3), 3, None, &opts).unwrap();
        assert!(e.error_to(&truth) < 1e-9, "{:?}", e.position_m);
    }

    #[test]
    fn degenerate_layouts_are_rejected() {
        let same = [[1.0, 1.0, 0.0], [1.0, 1.0, 5.0], [1.0, 1.0, 2.0]];
        assert!(matches!(
            trilaterate(&obs(&same, [3.0, 3.0, 0.0], 2), 2, None),
            Err(Error::Geometry(_))
        ));
        let line = [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0], [5.0, 5.0, 5.0]];
        assert!(matches!(
            trilaterate(&obs(&line, [3.0, 0.0, 1.0], 3), 3, None),
            Err(Error::Geometry(_))
        ));
        assert!(trilaterate(&obs(&line[..2], [3.0, 0.0, 1.0], 3), 3, None).is_err());
    }

    #[test]
    fn supplied_guess_is_used() {
        let radars = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [3.0, 7.0, 0.0], [0.0, 5.0, 4.0]];
        let truth = [4.0, 2.0, 1.0];
        let e = trilaterate(&obs(&radars, truth, 3), 3, Some(&[3.0, 3.0, 3.0])).unwrap();
        assert!(e.error_to(&truth) < 1e-9);
    }

    #[test]
    fn single_precision_solver() {
        let radars = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [3.0, 7.0, 0.0]];
        let truth = [4.2, 5.5, 0.0];
        let e = trilaterate_in::<f32>(&obs(&radars, truth, 2), 2, None, &SolverOptions::default()).unwrap();
        assert!(e.error_to(&truth) < 1e-4);
    }

    #[test]
    fn gaussian_elimination() {
        let x = solve(vec![vec![2.0f64, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }
}
