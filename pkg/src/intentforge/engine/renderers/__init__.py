"""Figure renderers — one module per figure kind."""
