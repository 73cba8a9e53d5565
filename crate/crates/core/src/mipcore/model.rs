use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::MipError;

/// Constraint families, used to label model rows and oracle reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintFamily {
    ArcChoice,
    ArcAvailability,
    FlowConservation,
    ScheduleOrigin,
    ChargeAtStation,
    MovementDraw,
    ChargeRate,
    DischargeRate,
    EnergyBounds,
    InitialEnergy,
    EnergyBalance,
    ActiveGeneration,
    ReactiveGeneration,
    SolarCurtailment,
    ActiveLineLimit,
    ReactiveLineLimit,
    ActiveBalance,
    ReactiveBalance,
    VoltageDrop,
    VoltageBounds,
    Integrality,
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Column {
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
    pub integer: bool,
}

/// `lower <= sum(coef * x) <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub lower: f64,
    pub upper: f64,
    pub coeffs: Vec<(usize, f64)>,
    pub family: ConstraintFamily,
}

/// Binary flat index to its fixed value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialAssignment {
    pub values: BTreeMap<usize, u8>,
}

impl PartialAssignment {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn insert(&mut self, index: usize, value: bool) {
        self.values.insert(index, u8::from(value));
    }

    pub fn ones(&self) -> usize {
        self.values.values().filter(|&&v| v == 1).count()
    }
}

/// A linear minimisation problem with optional bound fixings.
#[derive(Debug, Clone, PartialEq)]
pub struct MipModel {
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    pub objective_offset: f64,
    /// Original bounds of currently fixed columns.
    saved_bounds: BTreeMap<usize, (f64, f64)>,
}

impl MipModel {
    pub fn new(columns: Vec<Column>) -> Self {
        MipModel { columns, rows: Vec::new(), objective_offset: 0.0, saved_bounds: BTreeMap::new() }
    }

    pub fn add_row(
        &mut self,
        family: ConstraintFamily,
        lower: f64,
        upper: f64,
        coeffs: Vec<(usize, f64)>,
    ) {
        debug_assert!(coeffs.iter().all(|&(c, _)| c < self.columns.len()));
        self.rows.push(Row { lower, upper, coeffs, family });
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn integer_count(&self) -> usize {
        self.columns.iter().filter(|c| c.integer).count()
    }

    pub fn fixed_count(&self) -> usize {
        self.saved_bounds.len()
    }

    /// Pins every listed binary to its value. Fails without modifying the
    /// model when a key is not a binary column.
    pub fn fix_binaries(&mut self, assignment: &PartialAssignment) -> Result<(), MipError> {
        for (&i, &v) in &assignment.values {
            let ok = self.columns.get(i).is_some_and(|c| c.integer && c.lower >= 0.0 && c.upper <= 1.0);
            if !ok || v > 1 {
                return Err(MipError::NotBinary(i));
            }
        }
        for (&i, &v) in &assignment.values {
            let col = &mut self.columns[i];
            self.saved_bounds.entry(i).or_insert((col.lower, col.upper));
            col.lower = f64::from(v);
            col.upper = f64::from(v);
        }
        Ok(())
    }

    /// Restores the bounds of every fixed column.
    pub fn unfix(&mut self) {
        for (i, (lo, hi)) in std::mem::take(&mut self.saved_bounds) {
            self.columns[i].lower = lo;
            self.columns[i].upper = hi;
        }
    }

    /// Objective value of a point, including the constant offset.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.columns.iter().zip(x).map(|(c, v)| c.cost * v).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MipModel {
        let bin = Column { lower: 0.0, upper: 1.0, cost: 1.0, integer: true };
        let cont = Column { lower: 0.0, upper: 5.0, cost: 0.0, integer: false };
        MipModel::new(vec![bin, bin, cont])
    }

    #[test]
    fn fix_and_unfix() {
        let mut m = tiny();
        let before = m.clone();
        m.fix_binaries(&PartialAssignment::default()).unwrap();
        assert_eq!(m, before);
        let mut a = PartialAssignment::default();
        a.insert(1, true);
        m.fix_binaries(&a).unwrap();
        assert_eq!((m.columns[1].lower, m.columns[1].upper), (1.0, 1.0));
        assert_eq!(m.columns[0], before.columns[0]);
        m.unfix();
        assert_eq!(m, before);
    }

    #[test]
    fn rejects_continuous_key() {
        let mut m = tiny();
        let mut a = PartialAssignment::default();
        a.insert(0, false);
        a.insert(2, true);
        assert!(matches!(m.fix_binaries(&a), Err(MipError::NotBinary(2))));
        assert_eq!(m, tiny());
    }
}
