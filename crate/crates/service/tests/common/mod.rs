#![allow(dead_code)]

use evprice_core::dataset::{parse_csv, synthesize};
use evprice_core::learners::{train, FittedModel, LearnerConfig, TreeParams};

pub const TOKEN: &str = "s3cret-token";

pub const REFERENCE_REQUEST: &str = r#"{
    "Inputs": {
        "input1":
        [
            {
                "Model": "Model X",
                "Year": "2017",
                "Price": "0",
                "Battery": "75",
                "Miles": "19000",
                "Date": "2019-01-01"
            }
        ]
    },
    "GlobalParameters":  {
    }
}"#;

pub fn synth_model() -> FittedModel {
    let params = TreeParams {
        num_trees: 20,
        ..Default::default()
    };
    train(&LearnerConfig::Boosted(params), &synthesize(300, 5)).unwrap()
}

pub fn constant_model() -> FittedModel {
    let csv = "Model,Year,Battery,Price,Miles\n\
               Model S,2013,Base,5,36800\n\
               Model X,2017,90D,5,12229\n\
               Model 3,2018,75,5,2193\n";
    train(
        &LearnerConfig::Boosted(TreeParams {
            min_samples_leaf: 1,
            num_trees: 5,
            ..Default::default()
        }),
        &parse_csv(csv, None).unwrap(),
    )
    .unwrap()
}
