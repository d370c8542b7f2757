"""Time-bound statements for randomized distributed algorithms."""
