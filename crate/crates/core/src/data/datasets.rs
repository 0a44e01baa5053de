//! Column schemas for the public benchmark tables (no data is bundled).
//!
//! Binary columns follow the usual preprocessed layout where each
//! categorical attribute is collapsed to a single indicator.

use super::schema::{Actionability, FeatureSchema, FeatureSpec};

pub const ADULT_LABEL: &str = "income";
pub const COMPAS_LABEL: &str = "score";
pub const GMC_LABEL: &str = "SeriousDlqin2yrs";

pub fn adult_schema() -> FeatureSchema {
    let immutable = Actionability::Immutable;
    FeatureSchema::new(vec![
        FeatureSpec::continuous("age"),
        FeatureSpec::continuous("education-num"),
        FeatureSpec::continuous("capital-gain"),
        FeatureSpec::continuous("capital-loss"),
        FeatureSpec::continuous("hours-per-week"),
        FeatureSpec::binary("workclass"),
        FeatureSpec::binary("marital-status"),
        FeatureSpec::binary("occupation"),
        FeatureSpec::binary("race").with_actionability(immutable),
        FeatureSpec::binary("sex").with_actionability(immutable),
        FeatureSpec::binary("native-country"),
    ])
    .expect("static schema is valid")
}

pub fn compas_schema() -> FeatureSchema {
    let immutable = Actionability::Immutable;
    FeatureSchema::new(vec![
        FeatureSpec::continuous("age"),
        FeatureSpec::continuous("two_year_recid"),
        FeatureSpec::continuous("priors_count"),
        FeatureSpec::continuous("length_of_stay"),
        FeatureSpec::binary("c_charge_degree"),
        FeatureSpec::binary("race").with_actionability(immutable),
        FeatureSpec::binary("sex").with_actionability(immutable),
    ])
    .expect("static schema is valid")
}

pub fn gmc_schema() -> FeatureSchema {
    FeatureSchema::new(vec![
        FeatureSpec::continuous("RevolvingUtilizationOfUnsecuredLines"),
        FeatureSpec::continuous("age"),
        FeatureSpec::continuous("NumberOfTime30-59DaysPastDueNotWorse").with_group("payment-morale"),
        FeatureSpec::continuous("DebtRatio"),
        FeatureSpec::continuous("MonthlyIncome"),
        FeatureSpec::continuous("NumberOfOpenCreditLinesAndLoans"),
        FeatureSpec::continuous("NumberOfTimes90DaysLate").with_group("payment-morale"),
        FeatureSpec::continuous("NumberRealEstateLoansOrLines"),
        FeatureSpec::continuous("NumberOfTime60-89DaysPastDueNotWorse").with_group("payment-morale"),
        FeatureSpec::continuous("NumberOfDependents"),
    ])
    .expect("static schema is valid")
}

/// Schema and label column by dataset name (`adult`, `compas`, `gmc`).
pub fn named_schema(name: &str) -> Option<(FeatureSchema, &'static str)> {
    match name.to_ascii_lowercase().as_str() {
        "adult" => Some((adult_schema(), ADULT_LABEL)),
        "compas" => Some((compas_schema(), COMPAS_LABEL)),
        "gmc" | "give-me-credit" => Some((gmc_schema(), GMC_LABEL)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protected_attributes_are_immutable() {
        let adult = adult_schema();
        assert_eq!(adult.len(), 11);
        let immutables: Vec<_> = adult.immutable_features().map(|i| adult.features()[i].name.as_str()).collect();
        assert_eq!(immutables, ["race", "sex"]);
        assert_eq!(gmc_schema().immutable_features().count(), 0);
        assert!(named_schema("COMPAS").is_some());
    }
}
