package main

import "fmt"

func grade(score int) string {
	switch {
	case score >= 90:
		return "A"
	case score >= 80:
		return "B"
	case score >= 70:
		return "C"
	}
	return ""
}

func main() {
	for _, s := range []int{95, 82, 40} {
		fmt.Println(grade(s))
	}
}
