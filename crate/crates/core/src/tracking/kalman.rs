//! Constant-velocity Kalman filter over `(u, v, s, r)`: box centre, area and aspect
//! ratio, with velocities for the first three (aspect ratio is assumed constant).

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::bbox::BBox;

type Vec7 = SVector<f64, 7>;
type Mat7 = SMatrix<f64, 7, 7>;
type Mat4x7 = SMatrix<f64, 4, 7>;
type Mat4 = SMatrix<f64, 4, 4>;

/// Smallest area a predicted box may have.
pub const MIN_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanParams {
    pub measurement_noise: [f64; 4],
    pub process_noise: [f64; 7],
    pub initial_covariance: [f64; 7],
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            measurement_noise: [1.0, 1.0, 10.0, 10.0],
            process_noise: [1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 0.0001],
            // unobserved velocities start very uncertain
            initial_covariance: [10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanBoxState {
    pub x: Vec7,
    pub p: Mat7,
    pub frames_since_update: usize,
    pub hit_streak: usize,
    pub hits: usize,
    /// How often a prediction produced a non-positive area that had to be clamped.
    pub clamp_events: usize,
    params: KalmanParams,
}

fn transition() -> Mat7 {
    let mut f = Mat7::identity();
    f[(0, 4)] = 1.0;
    f[(1, 5)] = 1.0;
    f[(2, 6)] = 1.0;
    f
}

fn observation() -> Mat4x7 {
    let mut h = Mat4x7::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

fn symmetrize(p: &mut Mat7) {
    *p = (*p + p.transpose()) * 0.5;
}

impl KalmanBoxState {
    pub fn new(bbox: &BBox, params: KalmanParams) -> Self {
        let [u, v, s, r] = bbox.to_center_scale();
        let x = Vec7::from_column_slice(&[u, v, s.max(MIN_SCALE), r.max(f64::EPSILON), 0.0, 0.0, 0.0]);
        let p = Mat7::from_diagonal(&Vec7::from_column_slice(&params.initial_covariance));
        Self { x, p, frames_since_update: 0, hit_streak: 1, hits: 1, clamp_events: 0, params }
    }

    pub fn bbox(&self) -> BBox {
        BBox::from_center_scale(self.x[0], self.x[1], self.x[2], self.x[3])
    }

    /// Advance one frame along the constant-velocity model.
    pub fn predict(&mut self) {
        let f = transition();
        let q = Mat7::from_diagonal(&Vec7::from_column_slice(&self.params.process_noise));
        self.x = f * self.x;
        self.p = f * self.p * f.transpose() + q;
        symmetrize(&mut self.p);
        if self.x[2] <= 0.0 {
            self.x[2] = MIN_SCALE;
            self.x[6] = 0.0;
            self.clamp_events += 1;
            log::debug!("kalman: non-positive box area after predict, clamped");
        }
        if self.frames_since_update > 0 {
            self.hit_streak = 0;
        }
        self.frames_since_update += 1;
    }

    /// Fold in a measured box.
    pub fn update(&mut self, measured: &BBox) {
        let z = SVector::<f64, 4>::from_column_slice(&measured.to_center_scale());
        let h = observation();
        let r = Mat4::from_diagonal(&SVector::<f64, 4>::from_column_slice(&self.params.measurement_noise));
        let innovation = z - h * self.x;
        let s = h * self.p * h.transpose() + r;
        let s_inv = s.try_inverse().expect("innovation covariance is positive definite");
        let k = self.p * h.transpose() * s_inv;
        self.x += k * innovation;
        // Joseph form keeps P symmetric positive semidefinite
        let i_kh = Mat7::identity() - k * h;
        self.p = i_kh * self.p * i_kh.transpose() + k * r * k.transpose();
        symmetrize(&mut self.p);
        self.x[2] = self.x[2].max(MIN_SCALE);
        self.x[3] = self.x[3].max(f64::EPSILON);
        self.frames_since_update = 0;
        self.hits += 1;
        self.hit_streak += 1;
    }
}
