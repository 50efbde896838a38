# Test package for choice-consistency
