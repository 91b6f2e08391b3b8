//! JSON has no NaN: serde_json writes it as `null`. These read it back.

use serde::{Deserialize, Deserializer};

pub fn f64_or_nan<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

pub fn vec_or_nan<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
}

#[cfg(test)]
mod tests {
    use crate::thermofit::TemperatureFit;

    #[test]
    fn nan_survives_json() {
        let fit = TemperatureFit {
            temperature: f64::NAN,
            temperature_error: f64::NAN,
            beta: -0.1,
            beta_error: 0.01,
            window: None,
            points: 3,
            residual_norm: 0.0,
            normalized_residuals: vec![f64::NAN, 1.0],
            converged: true,
            not_thermal: true,
        };
        let back: TemperatureFit = serde_json::from_str(&serde_json::to_string(&fit).unwrap()).unwrap();
        assert!(back.temperature.is_nan() && back.normalized_residuals[0].is_nan());
        assert_eq!(back.beta, -0.1);
    }
}
