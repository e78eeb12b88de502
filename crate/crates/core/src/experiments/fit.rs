//! Least-squares gaussian fit for delay scans.

use super::CurvePoint;
use crate::error::{Error, Result};

const FOUR_LN2: f64 = 4.0 * core::f64::consts::LN_2;

/// `offset + amplitude * exp(-4 ln2 (x - center)^2 / fwhm^2)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub fwhm: f64,
    pub offset: f64,
    /// Weighted residual sum of squares.
    pub chi2: f64,
    pub iterations: u32,
}

impl GaussianFit {
    pub fn eval(&self, x: f64) -> f64 {
        let r = (x - self.center) / self.fwhm;
        self.offset + self.amplitude * libm::exp(-FOUR_LN2 * r * r)
    }
}

/// Full width at half maximum of a single-peaked curve, from a gaussian fit.
pub fn fwhm_estimate(points: &[CurvePoint]) -> Result<f64> {
    fit_gaussian(points).map(|f| f.fwhm)
}

/// Width of the region above half of the peak (over the curve minimum),
/// with linear interpolation at the two crossings. Model free.
pub fn half_max_width(points: &[CurvePoint]) -> Result<f64> {
    let peak = check_single_peak(points)?;
    let (lo, hi) = y_range(points);
    let level = lo + 0.5 * (hi - lo);
    let cross = |a: &CurvePoint, b: &CurvePoint| a.x + (level - a.y) * (b.x - a.x) / (b.y - a.y);
    let left = (1..=peak)
        .rev()
        .find(|&i| points[i - 1].y < level)
        .map(|i| cross(&points[i - 1], &points[i]))
        .ok_or(Error::FitFailed("peak not bracketed on the left"))?;
    let right = (peak..points.len() - 1)
        .find(|&i| points[i + 1].y < level)
        .map(|i| cross(&points[i], &points[i + 1]))
        .ok_or(Error::FitFailed("peak not bracketed on the right"))?;
    Ok(right - left)
}

fn y_range(points: &[CurvePoint]) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)))
}

/// Returns the index of the maximum after checking that the curve has one
/// peak standing above the noise and falls below half height on both sides.
fn check_single_peak(points: &[CurvePoint]) -> Result<usize> {
    if points.len() < 5 {
        return Err(Error::FitFailed("need at least five points"));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite() || !(p.y_err >= 0.0)) {
        return Err(Error::FitFailed("non-finite data"));
    }
    if points.windows(2).any(|w| w[1].x <= w[0].x) {
        return Err(Error::FitFailed("x values must increase"));
    }
    let (lo, hi) = y_range(points);
    let peak = points.iter().enumerate().max_by(|a, b| a.1.y.total_cmp(&b.1.y)).map(|(i, _)| i).unwrap_or(0);
    let noise = points[peak].y_err;
    if !(hi - lo > 0.0) || hi - lo <= 3.0 * noise {
        return Err(Error::FitFailed("no peak above the noise floor"));
    }
    let level = lo + 0.5 * (hi - lo);
    if points[0].y >= level || points[points.len() - 1].y >= level {
        return Err(Error::FitFailed("peak not bracketed by the scan"));
    }
    // Outside the run of points around the maximum, nothing may rise
    // significantly above half height.
    let mut start = peak;
    while start > 0 && points[start - 1].y >= level {
        start -= 1;
    }
    let mut end = peak;
    while end + 1 < points.len() && points[end + 1].y >= level {
        end += 1;
    }
    let stray =
        points.iter().enumerate().filter(|(i, _)| *i < start || *i > end).any(|(_, p)| p.y - 3.0 * p.y_err > level);
    if stray {
        return Err(Error::FitFailed("curve is not unimodal"));
    }
    Ok(peak)
}

/// Levenberg-Marquardt fit of a gaussian plus constant offset. Points are
/// weighted by `1/y_err^2` when errors are given.
pub fn fit_gaussian(points: &[CurvePoint]) -> Result<GaussianFit> {
    let peak = check_single_peak(points)?;
    let (lo, hi) = y_range(points);

    // Work in normalized coordinates for conditioning.
    let x0 = points[peak].x;
    let xs = points[points.len() - 1].x - points[0].x;
    let ys = hi - lo;
    let floor = points.iter().map(|p| p.y_err).filter(|e| *e > 0.0).fold(f64::INFINITY, f64::min);
    let weights: alloc::vec::Vec<f64> = points
        .iter()
        .map(|p| {
            if floor.is_finite() {
                let s = p.y_err.max(floor) / ys;
                1.0 / (s * s)
            } else {
                1.0
            }
        })
        .collect();
    let data: alloc::vec::Vec<(f64, f64)> = points.iter().map(|p| ((p.x - x0) / xs, (p.y - lo) / ys)).collect();

    let width0 = half_max_width(points).map(|w| w / xs).unwrap_or(0.25);
    let mut p = [1.0, 0.0, width0, 0.0];
    let chi2 = |p: &[f64; 4]| -> f64 {
        data.iter()
            .zip(&weights)
            .map(|(&(x, y), w)| {
                let r = (x - p[1]) / p[2];
                let d = y - (p[3] + p[0] * libm::exp(-FOUR_LN2 * r * r));
                w * d * d
            })
            .sum()
    };

    let mut current = chi2(&p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for _ in 0..500 {
        iterations += 1;
        let mut jtj = [[0.0f64; 4]; 4];
        let mut jtr = [0.0f64; 4];
        for (&(x, y), w) in data.iter().zip(&weights) {
            let dx = x - p[1];
            let r = dx / p[2];
            let e = libm::exp(-FOUR_LN2 * r * r);
            let f = p[3] + p[0] * e;
            let j = [
                e,
                p[0] * e * 2.0 * FOUR_LN2 * dx / (p[2] * p[2]),
                p[0] * e * 2.0 * FOUR_LN2 * dx * dx / (p[2] * p[2] * p[2]),
                1.0,
            ];
            for a in 0..4 {
                jtr[a] += w * j[a] * (y - f);
                for b in 0..4 {
                    jtj[a][b] += w * j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut m = jtj;
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += lambda * jtj[a][a].max(1e-12);
            }
            let Some(step) = solve4(m, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
            let c = if trial[2] > 0.0 { chi2(&trial) } else { f64::INFINITY };
            if c < current {
                let converged = (current - c) <= 1e-12 * current.max(1e-300);
                p = trial;
                current = c;
                lambda = (lambda * 0.1).max(1e-12);
                improved = true;
                if converged {
                    lambda = 1e12;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved || lambda >= 1e12 {
            break;
        }
    }

    let fit = GaussianFit {
        amplitude: p[0] * ys,
        center: x0 + p[1] * xs,
        fwhm: p[2] * xs,
        offset: lo + p[3] * ys,
        chi2: current,
        iterations,
    };
    let (xmin, xmax) = (points[0].x, points[points.len() - 1].x);
    if !(fit.fwhm.is_finite() && fit.fwhm > 0.0 && fit.amplitude > 0.0) {
        return Err(Error::FitFailed("fit diverged"));
    }
    if fit.center < xmin || fit.center > xmax || fit.fwhm > 2.0 * (xmax - xmin) {
        return Err(Error::FitFailed("fitted peak outside the scan"));
    }
    Ok(fit)
}

fn solve4(mut m: [[f64; 4]; 4], mut v: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        v.swap(col, pivot);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (a, b) in m[row].iter_mut().zip(pivot_row).skip(col) {
                *a -= f * b;
            }
            v[row] -= f * v[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| m[row][k] * x[k]).sum();
        x[row] = (v[row] - s) / m[row][row];
    }
    Some(x)
}
