//! Built-in systems with analytic flows, covering the autonomous and
//! non-autonomous, linear and nonlinear cases.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub n: usize,
    pub rhs: &'static [&'static str],
    pub family: &'static [&'static str],
    pub family_domain: Option<&'static str>,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "riccati",
        n: 1,
        rhs: &["x1^2"],
        family: &["a1 / (1 + (sigma - tau) * a1)"],
        family_domain: Some("1 - (tau - sigma) * a1"),
    },
    CatalogEntry {
        name: "zero",
        n: 1,
        rhs: &["0"],
        family: &["a1"],
        family_domain: None,
    },
    CatalogEntry {
        name: "exp_scalar",
        n: 1,
        rhs: &["x1"],
        family: &["exp(tau - sigma) * a1"],
        family_domain: None,
    },
    CatalogEntry {
        name: "affine_scalar",
        n: 1,
        rhs: &["x1 + 1"],
        family: &["exp(tau - sigma) * (a1 + 1) - 1"],
        family_domain: None,
    },
    CatalogEntry {
        name: "rotation",
        n: 2,
        rhs: &["-x2", "x1"],
        family: &[
            "cos(tau - sigma) * a1 - sin(tau - sigma) * a2",
            "sin(tau - sigma) * a1 + cos(tau - sigma) * a2",
        ],
        family_domain: None,
    },
    CatalogEntry {
        name: "shear",
        n: 1,
        rhs: &["t * x1"],
        family: &["a1 * exp((tau^2 - sigma^2) / 2)"],
        family_domain: None,
    },
];

pub fn lookup(name: &str) -> Option<&'static CatalogEntry> {
    CATALOG.iter().find(|e| e.name == name)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    CATALOG.iter().map(|e| e.name)
}
