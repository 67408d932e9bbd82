# freewick: free semicircular traces, chord configurations, GUE moments and norm bounds
