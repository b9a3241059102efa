//! Prompt construction for the generative operators and parsing of their
//! responses.

mod parse;
mod prompts;
mod templates;

pub use parse::{parse_program, parse_tests, wrap_in_fence, ASSERT_KEYWORD};
pub use prompts::{
    CoverageAnnotatedSource, LineMarker, PromptBuilder, PromptRequest, Temperatures,
};
pub use templates::{render, Templates, TEMPLATE_VERSION};
