//! Parse queries, compile them into guidance circuits and check the result.

use logiguide::model::NodeSpec;
use logiguide::{
    check_equivalence, compile, parse_formula, validate_structure, CategoricalModel, DistributionModel, TaxonomyModel,
};

fn show(model: &DistributionModel, text: &str) -> logiguide::Result<()> {
    let f = parse_formula(text, model.registry())?;
    let c = compile(&f, model)?;
    let report = validate_structure(&c, model)?;
    println!("{text}");
    println!("  circuit     {}", c.to_sexp(model.registry()));
    println!("  nodes       {}", c.node_count());
    println!("  valid       {}", report.ok);
    println!("  equivalent  {}", check_equivalence(&f, &c, model)?);
    Ok(())
}

fn main() -> logiguide::Result<()> {
    let digits = CategoricalModel::with_values(&[
        ("digit", &["0", "1", "2", "3", "4", "5", "6", "7", "8", "9"]),
        ("color", &["red", "green", "blue", "yellow", "purple", "cyan"]),
    ])?
    .into();
    show(&digits, "(digit.1 & blue) |ME (digit.9 & red)")?;
    show(&digits, "~(red | blue) & digit.3")?;

    let animals: DistributionModel = TaxonomyModel::new(
        &[
            NodeSpec::new("animal", None),
            NodeSpec::new("mammal", Some("animal")),
            NodeSpec::new("dog", Some("mammal")),
            NodeSpec::new("cat", Some("mammal")),
            NodeSpec::new("bird", Some("animal")),
        ],
        None,
    )?
    .into();
    show(&animals, "mammal & ~dog")?;

    match parse_formula("digit.1 & purpl", digits.registry()) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
