//! Exact 3×3 integer matrix arithmetic.

use super::TorusError;

pub type IMat3 = [[i64; 3]; 3];
pub type WMat3 = [[i128; 3]; 3];

pub const IDENTITY: IMat3 = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

pub fn widen(m: &IMat3) -> WMat3 {
    let mut w = [[0i128; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            w[i][j] = m[i][j] as i128;
        }
    }
    w
}

pub fn mul_checked(a: &WMat3, b: &WMat3) -> Result<WMat3, TorusError> {
    let mut c = [[0i128; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc: i128 = 0;
            for k in 0..3 {
                let t = a[i][k].checked_mul(b[k][j]).ok_or(TorusError::Overflow)?;
                acc = acc.checked_add(t).ok_or(TorusError::Overflow)?;
            }
            c[i][j] = acc;
        }
    }
    Ok(c)
}

pub fn pow_checked(m: &WMat3, k: u32) -> Result<WMat3, TorusError> {
    let mut acc = widen(&IDENTITY);
    for _ in 0..k {
        acc = mul_checked(&acc, m)?;
    }
    Ok(acc)
}

pub fn narrow(m: &WMat3) -> Result<IMat3, TorusError> {
    let mut out = [[0i64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = i64::try_from(m[i][j]).map_err(|_| TorusError::Overflow)?;
        }
    }
    Ok(out)
}

pub fn det(m: &WMat3) -> i128 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Adjugate, so that `m * adj(m) = det(m) * I`.
pub fn adjugate(m: &WMat3) -> WMat3 {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ]
}

pub fn apply(m: &WMat3, v: &[i128; 3]) -> [i128; 3] {
    let mut out = [0i128; 3];
    for i in 0..3 {
        out[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
    }
    out
}

pub fn to_f64(m: &IMat3) -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::from_fn(|i, j| m[i][j] as f64)
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

/// Lower-triangular column Hermite form: returns H = m·U with U unimodular,
/// H lower triangular with positive diagonal. Requires det(m) ≠ 0.
pub fn column_hermite(m: &WMat3) -> WMat3 {
    let mut h = *m;
    for row in 0..3 {
        for col in (row + 1)..3 {
            let a = h[row][row];
            let b = h[row][col];
            if b == 0 {
                continue;
            }
            let (g, x, y) = ext_gcd(a, b);
            let (p, q) = (a / g, b / g);
            // [col_row, col_col] <- [x·c_r + y·c_c, −q·c_r + p·c_c], determinant x·p + y·q = 1
            for r in 0..3 {
                let cr = h[r][row];
                let cc = h[r][col];
                h[r][row] = x * cr + y * cc;
                h[r][col] = -q * cr + p * cc;
            }
        }
        if h[row][row] < 0 {
            for r in 0..3 {
                h[r][row] = -h[r][row];
            }
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjugate_inverts() {
        let m: WMat3 = [[6, 4, 3], [3, 2, 1], [4, 3, 2]];
        let adj = adjugate(&m);
        let p = mul_checked(&m, &adj).unwrap();
        let d = det(&m);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(p[i][j], if i == j { d } else { 0 });
            }
        }
    }

    #[test]
    fn hermite_is_lower_triangular_with_same_det() {
        let m: WMat3 = [[5, 4, 3], [3, 1, 1], [4, 3, 1]];
        let h = column_hermite(&m);
        assert_eq!(h[0][1], 0);
        assert_eq!(h[0][2], 0);
        assert_eq!(h[1][2], 0);
        assert_eq!(det(&h).abs(), det(&m).abs());
        assert!(h[0][0] > 0 && h[1][1] > 0 && h[2][2] > 0);
    }

    #[test]
    fn power_of_base_matrix() {
        let m: WMat3 = [[1, 1, 0], [0, 0, 1], [1, 0, 0]];
        let a = pow_checked(&m, 6).unwrap();
        assert_eq!(a, [[6, 4, 3], [3, 2, 1], [4, 3, 2]]);
    }
}
