# Utils package for the graph Fujita toolkit
