use super::rank_order;
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};
use crate::semfactory::EmbeddingTable;

fn check<T: Scalar>(table: &EmbeddingTable<T>, query: &[T], k: usize) -> Result<()> {
    if table.is_empty() {
        return Err(Error::Empty("embedding table".into()));
    }
    if query.len() != table.dim() {
        return Err(Error::DimMismatch {
            expected: table.dim(),
            found: query.len(),
        });
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if !table.is_normalized() {
        return Err(Error::Config("table must be unit-normalized".into()));
    }
    Ok(())
}

/// Exhaustive top-`k` by cosine as `(row, similarity)`; ties by ascending id.
pub fn exact_knn_rows<T: Scalar>(
    table: &EmbeddingTable<T>,
    query: &[T],
    k: usize,
) -> Result<Vec<(usize, T)>> {
    check(table, query, k)?;
    let qn = dot(query, query).sqrt();
    if qn == T::zero() {
        return Err(Error::ZeroVector("query".into()));
    }
    let mut scored: Vec<(usize, T)> = (0..table.len())
        .map(|r| (r, dot(table.row(r), query) / qn))
        .collect();
    scored.sort_by(|a, b| rank_order((a.1, table.id(a.0)), (b.1, table.id(b.0))));
    scored.truncate(k);
    Ok(scored)
}

pub fn exact_knn<T: Scalar>(
    table: &EmbeddingTable<T>,
    query: &[T],
    k: usize,
) -> Result<Vec<(String, T)>> {
    Ok(exact_knn_rows(table, query, k)?
        .into_iter()
        .map(|(r, s)| (table.id(r).to_string(), s))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> EmbeddingTable<f64> {
        let mut t = EmbeddingTable::new(2);
        t.push("a", &[1.0, 0.0]).unwrap();
        t.push("b", &[0.0, 1.0]).unwrap();
        t.push("c", &[0.8, 0.6]).unwrap();
        t
    }

    #[test]
    fn hand_computed_top2() {
        let r = exact_knn(&toy(), &[1.0, 0.0], 2).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].0, "a");
        assert!((r[0].1 - 1.0).abs() < 1e-12);
        assert_eq!(r[1].0, "c");
        assert!((r[1].1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn k_beyond_table_returns_everything_sorted() {
        let r = exact_knn(&toy(), &[0.0, 1.0], 10).unwrap();
        let ids: Vec<&str> = r.iter().map(|x| x.0.as_str()).collect();
        assert_eq!(ids, ["b", "c", "a"]);
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let mut t = EmbeddingTable::new(2);
        t.push("z", &[0.0, 1.0]).unwrap();
        t.push("m", &[0.0, 1.0]).unwrap();
        t.push("a", &[1.0, 0.0]).unwrap();
        let r = exact_knn(&t, &[0.0, 1.0], 2).unwrap();
        assert_eq!((r[0].0.as_str(), r[1].0.as_str()), ("m", "z"));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            exact_knn(&EmbeddingTable::<f32>::new(2), &[1.0, 0.0], 1),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            exact_knn(&toy(), &[1.0, 0.0, 0.0], 1),
            Err(Error::DimMismatch { .. })
        ));
    }
}
