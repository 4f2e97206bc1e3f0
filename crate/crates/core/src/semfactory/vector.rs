use super::table::EmbeddingTable;
use crate::error::{Error, Result};
use crate::scalar::{dot, norm, Scalar};

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == T::zero() {
        return Err(Error::ZeroVector("left operand".into()));
    }
    if nb == T::zero() {
        return Err(Error::ZeroVector("right operand".into()));
    }
    let c = dot(a, b) / (na * nb);
    Ok(c.max(-T::one()).min(T::one()))
}

/// Scales `v` to unit length in place. Returns `false` for a zero vector.
pub fn normalize_vec<T: Scalar>(v: &mut [T]) -> bool {
    let n = norm(v);
    if n == T::zero() {
        return false;
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    true
}

pub fn normalize<T: Scalar>(table: &EmbeddingTable<T>) -> Result<EmbeddingTable<T>> {
    let mut out = EmbeddingTable::new(table.dim());
    let mut buf = vec![T::zero(); table.dim()];
    for (id, v) in table.iter() {
        buf.copy_from_slice(v);
        if !normalize_vec(&mut buf) {
            return Err(Error::ZeroVector(id.to_string()));
        }
        out.push(id, &buf)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_cases() {
        let v = [0.3f32, -1.2, 4.0];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() <= 1e-7);
        assert_eq!(cosine(&[1.0f32, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0f64, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - 0.70710678).abs() < 1e-6);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine(&[1.0f32], &[1.0, 2.0]),
            Err(Error::DimMismatch { .. })
        ));
        assert!(matches!(
            cosine(&[0.0f32, 0.0], &[1.0, 2.0]),
            Err(Error::ZeroVector(_))
        ));
    }

    #[test]
    fn cosine_is_clamped() {
        let a = [0.1f32; 7];
        let c = cosine(&a, &a).unwrap();
        assert!(c <= 1.0 && c >= -1.0);
    }

    #[test]
    fn normalize_cases() {
        let mut t = EmbeddingTable::<f32>::new(2);
        t.push("a", &[3.0, 4.0]).unwrap();
        t.push("b", &[1.0, 0.0]).unwrap();
        assert!(!t.is_normalized());
        let n = normalize(&t).unwrap();
        assert!(n.is_normalized());
        let a = n.get("a").unwrap();
        assert!((a[0] - 0.6).abs() < 1e-7 && (a[1] - 0.8).abs() < 1e-7);
        assert_eq!(n.get("b").unwrap(), &[1.0, 0.0]);

        t.push("z", &[0.0, 0.0]).unwrap();
        match normalize(&t) {
            Err(Error::ZeroVector(id)) => assert_eq!(id, "z"),
            other => panic!("{other:?}"),
        }
    }
}
