//! Confluent hypergeometric series 0F1 and 1F1.

use crate::error::{domain, Error, Result};
use crate::series::{Accumulator, SeriesControl};

fn check_b(b: f64) -> Result<()> {
    if b <= 0.0 && b == b.round() {
        return domain(format!("lower parameter must not be a nonpositive integer, got {b}"));
    }
    Ok(())
}

/// Term cap for confluent series, which inherently need about |z| terms.
fn confluent_cap(ctl: &SeriesControl, z: f64) -> SeriesControl {
    ctl.with_max_terms(ctl.max_terms.max((4.0 * z.abs()) as usize + 1000))
}

/// 0F1(; b; z) = sum z^q / ((b)_q q!).
pub fn hyp0f1(b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    check_b(b)?;
    let mut term = 1.0;
    let acc = Accumulator::run(ctl, |q| {
        if q > 0 {
            let qf = q as f64;
            term *= z / ((b + qf - 1.0) * qf);
        }
        term
    })?;
    Ok(acc.sum())
}

fn hyp1f1_direct(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    let mut term = 1.0;
    let acc = Accumulator::run(&confluent_cap(ctl, z), |q| {
        if q > 0 {
            let qf = q as f64 - 1.0;
            term *= (a + qf) / (b + qf) * z / (qf + 1.0);
        }
        term
    })?;
    Ok(acc.sum())
}

/// ln 1F1(a; b; z) for a, b > 0 and z >= 0 (all terms positive), summed in log space.
pub(crate) fn ln_hyp1f1_positive(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    debug_assert!(a > 0.0 && b > 0.0 && z >= 0.0);
    if z == 0.0 {
        return Ok(0.0);
    }
    let ctl = confluent_cap(ctl, z);
    // sum = exp(anchor) * scaled; the term is carried in the same scale
    const RESCALE: f64 = 1e280;
    let mut anchor = 0.0;
    let mut scaled = 1.0;
    let mut term = 1.0;
    let mut small_run = 0;
    for q in 1..ctl.max_terms {
        let qf = q as f64 - 1.0;
        term *= (a + qf) / (b + qf) * z / (qf + 1.0);
        scaled += term;
        if scaled > RESCALE {
            scaled /= RESCALE;
            term /= RESCALE;
            anchor += RESCALE.ln();
        }
        if term < ctl.tol * scaled {
            small_run += 1;
            if small_run >= ctl.consecutive_small {
                return Ok(anchor + scaled.ln());
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::NonConvergence { terms: ctl.max_terms, last: term })
}

/// Kummer's 1F1(a; b; z). Negative arguments go through 1F1(a;b;z) = e^z 1F1(b-a; b; -z).
pub fn hyp1f1(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    check_b(b)?;
    if z >= 0.0 {
        if a > 0.0 && b > 0.0 {
            return Ok(ln_hyp1f1_positive(a, b, z, ctl)?.exp());
        }
        return hyp1f1_direct(a, b, z, ctl);
    }
    let c = b - a;
    if c > 0.0 && b > 0.0 {
        Ok((z + ln_hyp1f1_positive(c, b, -z, ctl)?).exp())
    } else {
        Ok(z.exp() * hyp1f1_direct(c, b, -z, ctl)?)
    }
}
