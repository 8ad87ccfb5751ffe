# Test package for error handling functionality
