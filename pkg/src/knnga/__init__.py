"""KNN classification with genetic-search attribute selection."""
