// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Fixed-step frame export for plotting and animation tools.

use std::io::Write;

use super::ShowPlan;
use crate::{Error, Result};

pub const FRAME_HEADER: &str = "t,drone_id,x,y,z,vx,vy,vz,led";

/// Frames at `t0, t0 + dt, ...` up to `tf`.
pub fn frame_count(t0: f64, tf: f64, dt: f64) -> usize {
    ((tf - t0) / dt + 1e-9).floor() as usize + 1
}

/// Writes one row per drone per frame, frame-major, and returns the number of
/// data rows. Numbers use the shortest representation that parses back to
/// the same `f64`.
pub fn export_frames(plan: &ShowPlan, dt: f64, out: &mut impl Write) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt {dt} must be positive")));
    }
    let trajs = plan.trajectories()?;
    let frames = frame_count(plan.t0, plan.tf, dt);
    writeln!(out, "{FRAME_HEADER}")?;
    for k in 0..frames {
        let t = plan.t0 + k as f64 * dt;
        let at = t.min(plan.tf);
        for (d, traj) in trajs.iter().enumerate() {
            let s = traj.sample(at)?;
            let (p, v) = (s.position, s.velocity);
            writeln!(
                out,
                "{t},{d},{},{},{},{},{},{},{}",
                p.x,
                p.y,
                p.z,
                v.x,
                v.y,
                v.z,
                u8::from(plan.led_on(d, t))
            )?;
        }
    }
    Ok(frames * trajs.len())
}
