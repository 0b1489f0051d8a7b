/// Numerical tolerances shared across the crate.
///
/// Every threshold used by a decision (clustering, criticality, convergence)
/// lives here so callers can override them in one place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tol {
    /// Harmonic-structure residual and fixed-point residuals.
    pub structural: f64,
    /// Relative distance under which two eigenvalues share a cluster.
    pub cluster: f64,
    /// Relative distance under which a Sobolev scale equals a ladder magnitude.
    pub critical: f64,
    /// Absolute magnitude under which an eigenvalue counts as zero.
    pub null: f64,
    /// Agreement of successive terms in pointwise derivative limits.
    pub limit: f64,
    /// Smallest increment kept when summing tangent series.
    pub series: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol { structural: 1e-10, cluster: 1e-8, critical: 1e-9, null: 1e-10, limit: 1e-8, series: 1e-12 }
    }
}

impl Tol {
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        let slot = match key {
            "structural" => &mut self.structural,
            "cluster" => &mut self.cluster,
            "critical" => &mut self.critical,
            "null" => &mut self.null,
            "limit" => &mut self.limit,
            "series" => &mut self.series,
            _ => return false,
        };
        *slot = value;
        true
    }
}
