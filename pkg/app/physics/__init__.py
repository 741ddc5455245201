# Quantum core, geometry and cycle computations
