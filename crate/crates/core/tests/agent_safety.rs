use proptest::prelude::*;
use ranorch_core::Catalog;

#[path = "support/agent_tables.rs"]
mod agent_tables;

use agent_tables::{check_table, convergent_table, table};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Arbitrary tables: anything emitted validates, and the loop stops
    /// within its budget.
    #[test]
    fn never_emits_invalid_and_always_stops((mode, steps) in table()) {
        check_table(&Catalog::seeded(), mode, &steps).map_err(TestCaseError::fail)?;
    }

    /// Any junk prefix followed by enough feedback-driven turns converges.
    #[test]
    fn convergent_tables_converge((mode, steps) in convergent_table()) {
        let ok = check_table(&Catalog::seeded(), mode, &steps).map_err(TestCaseError::fail)?;
        prop_assert!(ok, "{:?}", steps);
    }
}
