use std::fmt;
use std::str::FromStr;

use num::BigRational;

use super::{ButcherTableau, Coefficient, TableauError};

/// The named methods shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CatalogMethod {
    ForwardEuler,
    Heun2,
    Heun3,
    Rk4Classic,
    Ssprk5,
    ImplicitEuler,
    ImplicitMidpoint,
}

/// The explicit methods plotted in the step-size sweeps, in stage order.
pub const EXPLICIT_FIGURE_METHODS: [CatalogMethod; 5] = [
    CatalogMethod::ForwardEuler,
    CatalogMethod::Heun2,
    CatalogMethod::Heun3,
    CatalogMethod::Rk4Classic,
    CatalogMethod::Ssprk5,
];

impl CatalogMethod {
    pub const ALL: [CatalogMethod; 7] = [
        CatalogMethod::ForwardEuler,
        CatalogMethod::Heun2,
        CatalogMethod::Heun3,
        CatalogMethod::Rk4Classic,
        CatalogMethod::Ssprk5,
        CatalogMethod::ImplicitEuler,
        CatalogMethod::ImplicitMidpoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CatalogMethod::ForwardEuler => "forward_euler",
            CatalogMethod::Heun2 => "heun2",
            CatalogMethod::Heun3 => "heun3",
            CatalogMethod::Rk4Classic => "rk4_classic",
            CatalogMethod::Ssprk5 => "ssprk5",
            CatalogMethod::ImplicitEuler => "implicit_euler",
            CatalogMethod::ImplicitMidpoint => "implicit_midpoint",
        }
    }

    pub fn tableau(self) -> ButcherTableau {
        // Explicit entries carry c = row sums of A. The implicit ones have the
        // usual c (1 and 1/2), which coincide with their row sums.
        let (a, b) = match self {
            CatalogMethod::ForwardEuler => (vec![vec![q(0, 1)]], vec![q(1, 1)]),
            CatalogMethod::Heun2 => (
                vec![vec![q(0, 1), q(0, 1)], vec![q(1, 1), q(0, 1)]],
                vec![q(1, 2), q(1, 2)],
            ),
            CatalogMethod::Heun3 => (
                rows(&[&[(0, 1), (0, 1), (0, 1)], &[(1, 3), (0, 1), (0, 1)], &[(0, 1), (2, 3), (0, 1)]]),
                vec![q(1, 4), q(0, 1), q(3, 4)],
            ),
            CatalogMethod::Rk4Classic => (
                rows(&[
                    &[(0, 1), (0, 1), (0, 1), (0, 1)],
                    &[(1, 2), (0, 1), (0, 1), (0, 1)],
                    &[(0, 1), (1, 2), (0, 1), (0, 1)],
                    &[(0, 1), (0, 1), (1, 1), (0, 1)],
                ]),
                vec![q(1, 6), q(1, 3), q(1, 3), q(1, 6)],
            ),
            CatalogMethod::Ssprk5 => (
                rows(&[
                    &[(0, 1), (0, 1), (0, 1), (0, 1), (0, 1)],
                    &[(1, 4), (0, 1), (0, 1), (0, 1), (0, 1)],
                    &[(1, 8), (1, 8), (0, 1), (0, 1), (0, 1)],
                    &[(0, 1), (0, 1), (1, 2), (0, 1), (0, 1)],
                    &[(3, 16), (-3, 8), (3, 8), (9, 16), (0, 1)],
                ]),
                vec![q(1, 6), q(0, 1), q(2, 3), q(1, 6), q(0, 1)],
            ),
            CatalogMethod::ImplicitEuler => (vec![vec![q(1, 1)]], vec![q(1, 1)]),
            CatalogMethod::ImplicitMidpoint => (vec![vec![q(1, 2)]], vec![q(1, 1)]),
        };
        ButcherTableau::with_row_sum_c(a, b)
            .expect("catalog tableaus are well formed")
            .named(self.name())
    }
}

impl fmt::Display for CatalogMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CatalogMethod {
    type Err = TableauError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CatalogMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| TableauError::UnknownMethod(s.to_string()))
    }
}

/// Looks up a catalog method by its identifier.
pub fn catalog_lookup(name: &str) -> Result<ButcherTableau, TableauError> {
    name.parse::<CatalogMethod>().map(CatalogMethod::tableau)
}

fn q(n: i64, d: i64) -> Coefficient {
    BigRational::new(n.into(), d.into())
}

fn rows(entries: &[&[(i64, i64)]]) -> Vec<Vec<Coefficient>> {
    entries
        .iter()
        .map(|row| row.iter().map(|&(n, d)| q(n, d)).collect())
        .collect()
}
