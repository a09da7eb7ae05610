mod common;

use common::*;
use narx_mss::dictionary::{count_terms, search_space_size, TermMatrix};
use narx_mss::{Dataset, Dictionary, DictionaryConfig, RegressorTerm};
use proptest::prelude::*;

#[test]
fn siso_reference_dictionary() {
    let cfg = DictionaryConfig::new(4, vec![4], 3);
    let dict = Dictionary::build(&cfg).unwrap();
    assert_eq!(dict.len(), 165);
    assert!(dict.terms()[0].is_constant());
    assert_eq!(search_space_size(165).to_string(), "46768052394588893382517914646921056628989841375232");
}

#[test]
fn zero_delay_is_rejected() {
    assert!(Dictionary::build(&DictionaryConfig::new(2, vec![2], 2).with_delay(0)).is_err());
}

#[test]
fn term_matrix_uses_the_longest_lag() {
    let n = 30;
    let data = Dataset::new(vec![(0..n).map(|k| k as f64).collect()], (0..n).map(|k| (k * k) as f64).collect()).unwrap();
    let dict = Dictionary::build(&DictionaryConfig::new(2, vec![3], 2)).unwrap();
    let tm = TermMatrix::new(&data, &dict).unwrap();
    assert_eq!(tm.start(), 3);
    assert_eq!(tm.rows(), n - 3);
    let j = dict.index_of(&"y(k-1)*x1(k-3)".parse().unwrap()).unwrap();
    assert_eq!(tm.column(j)[0], 4.0 * 0.0);
    assert_eq!(tm.column(j)[5], 49.0 * 5.0);
}

proptest! {
    #[test]
    fn count_matches_enumeration(ny in 0usize..5, nx in proptest::collection::vec(1usize..4, 1..3), degree in 1usize..4) {
        let cfg = if ny == 0 { DictionaryConfig::exogenous(nx, degree) } else { DictionaryConfig::new(ny, nx, degree) };
        let brute = brute_force_terms(variables(&cfg), degree);
        prop_assert_eq!(count_terms(&cfg).unwrap(), brute);
        prop_assert_eq!(Dictionary::build(&cfg).unwrap().len(), brute);
    }

    #[test]
    fn printed_terms_parse_back(ny in 1usize..4, nx in 1usize..4, degree in 1usize..4) {
        let dict = Dictionary::build(&DictionaryConfig::new(ny, vec![nx, 2], degree)).unwrap();
        for t in dict.terms() {
            let back: RegressorTerm = t.to_string().parse().unwrap();
            prop_assert_eq!(&back, t);
            prop_assert_eq!(dict.index_of(&back), dict.index_of(t));
        }
    }

    #[test]
    fn terms_are_distinct_and_within_degree(ny in 1usize..4, nx in 1usize..4, degree in 1usize..4) {
        let dict = Dictionary::build(&DictionaryConfig::new(ny, vec![nx], degree)).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for t in dict.terms() {
            prop_assert!(seen.insert(t.to_string()));
            prop_assert!(t.degree() as usize <= degree);
            prop_assert!(t.max_lag() <= ny.max(nx));
        }
    }
}
