use crate::error::{Error, Result};
use crate::numerics::param::ParamSet;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
}

/// Compares the analytic gradients already accumulated in `params` against
/// central differences of `f`, coordinate by coordinate.
///
/// The relative error of a coordinate is
/// `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
pub fn grad_check<P, F>(params: &mut P, mut f: F, h: f64) -> Result<GradCheckReport>
where
    P: ParamSet,
    F: FnMut(&P) -> f64,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::Usage(format!("finite-difference step {h} outside [1e-7, 1e-3]")));
    }
    let n_params = params.params().len();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    for pi in 0..n_params {
        let len = params.params()[pi].value.len();
        for k in 0..len {
            let (orig, analytic, name) = {
                let p = params.params()[pi];
                (p.value.as_slice()[k], p.grad.as_slice()[k], p.name.clone())
            };
            params.params_mut()[pi].value.as_mut_slice()[k] = orig + h;
            let plus = f(params);
            params.params_mut()[pi].value.as_mut_slice()[k] = orig - h;
            let minus = f(params);
            params.params_mut()[pi].value.as_mut_slice()[k] = orig;
            for v in [plus, minus] {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("objective at {name}[{k}]"),
                        value: v,
                    });
                }
            }
            let numeric = (plus - minus) / (2.0 * h);
            let err = (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs());
            report.coordinates += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((name, k));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::param::Param;
    use crate::numerics::rng::Rng;
    use crate::numerics::tensor::{sigmoid, Tensor};

    #[test]
    fn square_is_exact() {
        let mut ps = vec![Param::new("w", Tensor::column(vec![3.0]))];
        ps[0].grad = Tensor::column(vec![6.0]);
        let r = grad_check(&mut ps, |p| p[0].value.get(0, 0).powi(2), 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-9, "{r:?}");
        assert_eq!(ps[0].value.get(0, 0), 3.0);
    }

    #[test]
    fn constant_objective() {
        let mut ps = vec![Param::new("w", Tensor::column(vec![1.0, 2.0]))];
        let r = grad_check(&mut ps, |_| 4.0, 1e-5).unwrap();
        assert_eq!(r.max_rel_error, 0.0);
    }

    #[test]
    fn affine_sigmoid_sum() {
        let mut rng = Rng::new(17);
        let x: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let mut ps = vec![
            Param::new("w", Tensor::glorot(3, 3, &mut rng)),
            Param::new("b", Tensor::column((0..3).map(|_| rng.normal()).collect())),
        ];
        let f = |p: &Vec<Param>| -> f64 {
            let mut y = p[1].value.as_slice().to_vec();
            p[0].value.matvec_acc(&x, &mut y);
            y.iter().map(|v| sigmoid(*v)).sum()
        };
        // analytic: d/dy sigmoid = s(1-s)
        let mut y = ps[1].value.as_slice().to_vec();
        ps[0].value.matvec_acc(&x, &mut y);
        let dy: Vec<f64> = y.iter().map(|v| sigmoid(*v) * (1.0 - sigmoid(*v))).collect();
        ps[0].grad.outer_acc(&dy, &x, 1.0);
        ps[1].grad.add_scaled(&dy, 1.0);
        let r = grad_check(&mut ps, f, 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
        assert_eq!(r.coordinates, 12);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let mut ps = vec![Param::new("w", Tensor::column(vec![3.0]))];
        ps[0].grad = Tensor::column(vec![5.0]);
        let r = grad_check(&mut ps, |p| p[0].value.get(0, 0).powi(2), 1e-5).unwrap();
        assert!(r.max_rel_error > 0.1);
        assert_eq!(r.worst, Some(("w".to_string(), 0)));
    }

    #[test]
    fn non_finite_objective_names_coordinate() {
        let mut ps = vec![Param::new("w", Tensor::column(vec![0.0, 1.0]))];
        let err = grad_check(&mut ps, |p| if p[0].value.get(0, 0) > 0.0 { f64::NAN } else { 0.0 }, 1e-5).unwrap_err();
        assert!(err.to_string().contains("w[0]"), "{err}");
    }

    #[test]
    fn step_range_enforced() {
        let mut ps = vec![Param::new("w", Tensor::column(vec![0.0]))];
        assert!(grad_check(&mut ps, |_| 0.0, 1e-2).is_err());
    }
}
