# Initialize components package
