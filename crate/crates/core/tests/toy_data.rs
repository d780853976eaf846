use std::path::Path;

use plrank::data::{parse_xmlc, write_xmlc};
use plrank::datagen::synthetic_xmlc;

/// `data/toy` is rows 0..100 (train) and 100..150 (test) of
/// `synthetic_xmlc(150, 100, 50, 0)`.
#[test]
fn bundled_toy_files_match_the_generator() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy");
    let ds = synthetic_xmlc(150, 100, 50, 0).unwrap();
    for (name, rows) in [("train.txt", 0..100), ("test.txt", 100..150)] {
        let expected = ds.select(&rows.collect::<Vec<_>>());
        let path = root.join(name);
        assert_eq!(parse_xmlc(&path).unwrap(), expected, "{name}");
        let mut text = Vec::new();
        write_xmlc(&expected, &mut text).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), text, "{name}");
    }
}
