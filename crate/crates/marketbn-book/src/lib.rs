//! Runs the guide's code blocks as doc-tests so the book can never drift
//! from the library. Each chapter becomes one module.
