//! Small hand-written recognizers used by tests, the CLI self-test and the
//! acceptance suite.

use crate::morphism::{parse_recognizer, Recognizer};
use crate::presentation::{parse_presentation_with, Presentation};

/// At least three distinct data values.
pub const L1_TEXT: &str = include_str!("../fixtures/l1.rec");
/// First and last values are equal.
pub const L2_TEXT: &str = include_str!("../fixtures/l2.rec");
/// Two marker tracks whose single marked positions carry equal values.
pub const XY_TEXT: &str = include_str!("../fixtures/xy.rec");
/// Words of odd length, ignoring data.
pub const Z2_TEXT: &str = include_str!("../fixtures/z2.rec");

fn presentation(src: &str) -> Presentation {
    parse_presentation_with(src, |_, _| Ok(true)).expect("fixture parses").0
}

pub fn l1() -> Presentation {
    presentation(L1_TEXT)
}

pub fn l2() -> Presentation {
    presentation(L2_TEXT)
}

pub fn xy() -> Presentation {
    presentation(XY_TEXT)
}

pub fn z2() -> Presentation {
    presentation(Z2_TEXT)
}

pub fn l1_recognizer() -> Recognizer {
    parse_recognizer(L1_TEXT).expect("fixture parses")
}

pub fn l2_recognizer() -> Recognizer {
    parse_recognizer(L2_TEXT).expect("fixture parses")
}

pub fn xy_recognizer() -> Recognizer {
    parse_recognizer(XY_TEXT).expect("fixture parses")
}

pub fn z2_recognizer() -> Recognizer {
    parse_recognizer(Z2_TEXT).expect("fixture parses")
}
