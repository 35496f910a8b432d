//! Flow unit conversions. Everything inside the crate is m³/s; files and
//! printed reports use m³/h.

pub const SECONDS_PER_HOUR: f64 = 3600.0;

#[inline]
pub fn m3h_to_m3s(q: f64) -> f64 {
    q / SECONDS_PER_HOUR
}

#[inline]
pub fn m3s_to_m3h(q: f64) -> f64 {
    q * SECONDS_PER_HOUR
}

/// m³/h value that converts back to exactly `q`, when one lies within a few
/// ulps of `q·3600`; used when writing files so that values read from a
/// file survive a write/read cycle bit for bit.
pub fn m3s_to_m3h_exact(q: f64) -> f64 {
    let h = m3s_to_m3h(q);
    let (mut up, mut down) = (h, h);
    for _ in 0..8 {
        if m3h_to_m3s(up) == q {
            return up;
        }
        if m3h_to_m3s(down) == q {
            return down;
        }
        up = up.next_up();
        down = down.next_down();
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_tight(q in -1.0e7f64..1.0e7) {
            let back = m3s_to_m3h(m3h_to_m3s(q));
            prop_assert!((back - q).abs() <= 1e-12 * q.abs().max(f64::MIN_POSITIVE));
        }
    }

    proptest! {
        #[test]
        fn exact_inverse_reads_back_identically(h in -1.0e7f64..1.0e7) {
            let q = m3h_to_m3s(h);
            prop_assert_eq!(m3h_to_m3s(m3s_to_m3h_exact(q)), q);
        }
    }

    #[test]
    fn hour_to_second() {
        assert_eq!(m3h_to_m3s(7200.0), 2.0);
        assert_eq!(m3s_to_m3h(0.5), 1800.0);
    }
}
