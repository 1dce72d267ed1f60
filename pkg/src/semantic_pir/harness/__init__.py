"""Configuration, file and wire formats, transports and the command-line tool."""
