# Fluctuating work: SDE sampling, Fokker-Planck and tilted evolution, Jarzynski checks
