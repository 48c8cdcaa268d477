//! Measures how steep the exact solution's front is: prints the largest
//! |du/dx| at each of the four report times (finite differences on the
//! quadrature reference) and then scans t in (0, 1] for the global peak.
//! Context for the slope line in the acceptance report: steepness rises
//! until roughly t = 0.5 and relaxes afterwards.

use pinn_lab::oracle::reference_colehopf;
use pinn_lab::physics::nu;

fn slope(t: f64, x: f64) -> f64 {
    let h = 1e-5;
    let up = reference_colehopf(t, x + h, nu(), 128).unwrap();
    let dn = reference_colehopf(t, x - h, nu(), 128).unwrap();
    (up - dn) / (2.0 * h)
}

fn main() {
    // scan for the steepest slope of the true solution per report time
    for &t in &[0.25, 0.5, 0.75, 1.0] {
        let mut worst = 0.0f64;
        let mut at = 0.0;
        for i in 0..=400 {
            let x = -1.0 + 2.0 * i as f64 / 400.0;
            let s = slope(t, x).abs();
            if s > worst {
                worst = s;
                at = x;
            }
        }
        // refine around the coarse winner
        for i in 0..=200 {
            let x = at - 0.01 + 0.02 * i as f64 / 200.0;
            if x.abs() <= 1.0 {
                let s = slope(t, x).abs();
                if s > worst {
                    worst = s;
                    at = x;
                }
            }
        }
        println!("t={t}: max |u_x| = {worst:.3} at x = {at:+.4}");
    }
    // where does the steepness peak in time?
    let mut peak = (0.0, 0.0);
    for i in 1..=100 {
        let t = i as f64 / 100.0;
        let s = slope(t, 0.0).abs();
        if s > peak.1 {
            peak = (t, s);
        }
    }
    println!("steepest |u_x(t, 0)| over t: {:.3} at t = {}", peak.1, peak.0);
}
