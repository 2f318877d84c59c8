//! Deterministic float formatting shared by every text artifact.

/// 17 significant digits; enough to reconstruct any f64 bit-exactly.
pub(crate) fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::g17;

    #[test]
    fn g17_round_trips_f64() {
        let mut rng = crate::rng::CounterRng::new(11);
        for _ in 0..1000 {
            let x = (rng.next_f64() - 0.5) * rng.uniform(1e-12, 1e12);
            let back: f64 = g17(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {}", g17(x));
        }
        for x in [0.0, -0.0, f64::MIN_POSITIVE, f64::MAX, 1.0 / 3.0] {
            let back: f64 = g17(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
