"""One-hot graph encoder embedding for labeled, unlabeled and simulated graphs."""
