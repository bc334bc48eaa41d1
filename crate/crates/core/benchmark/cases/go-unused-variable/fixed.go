package main

import "fmt"

func main() {
	prices := []float64{2.5, 4.0, 3.5}
	total := 0.0
	for _, p := range prices {
		total += p
	}
	fmt.Printf("%.2f\n", total)
}
