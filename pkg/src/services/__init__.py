# Services package for the graph Fujita toolkit
