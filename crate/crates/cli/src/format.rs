use atem::bigreal::BigReal;

/// `%g`-style rendering with `digits` significant digits: fixed notation
/// for moderate exponents, trailing zeros trimmed.
pub fn significant(x: &BigReal, digits: usize) -> String {
    if x.is_zero() {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x.to_f64());
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
        return format!("{}e{exp}", trim(mantissa));
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim(&format!("{:.*}", decimals, x.to_f64())).to_string()
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Energy with eight decimals, rounded once from the working precision.
pub fn energy(e: &BigReal) -> String {
    e.to_fixed(8)
}

/// A log10 residual to one decimal; `-inf` for an exact zero.
pub fn log_residual(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.1}")
    }
}

/// Short scientific form for residuals and drifts; `-` when undefined.
pub fn small(x: f64) -> String {
    if x.is_nan() {
        "-".into()
    } else {
        format!("{x:.2e}")
    }
}
